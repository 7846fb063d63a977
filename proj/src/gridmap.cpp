#include "mmsim/gridmap.h"

#include "mmsim/errors.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmsim {

namespace {

constexpr double kTie = 1e-12;

// 1D squared distance transform (Felzenszwalb & Huttenlocher). Empty cells
// carry kFar instead of +inf so the envelope arithmetic stays finite.
constexpr double kFar = 1e20;

void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = double(q - v[j]);
        d[q] = dq * dq + f[v[j]];
    }
}

}  // namespace

Vec2 GridGeometry::cell_center(int x, int y) const {
    return origin.apply({(x + 0.5) * resolution, (y + 0.5) * resolution});
}

Cell GridGeometry::cell_containing(const Vec2& world) const {
    const Vec2 local = origin.apply_inverse(world);
    return {static_cast<int>(std::floor(local.x() / resolution)), static_cast<int>(std::floor(local.y() / resolution))};
}

std::optional<Cell> GridGeometry::world_to_cell(const Vec2& world) const {
    const Cell c = cell_containing(world);
    if (!in_bounds(c)) return std::nullopt;
    return c;
}

double OccupancyGrid::max_height() const {
    return heights.empty() ? 0.0 : *std::max_element(heights.begin(), heights.end());
}

std::size_t BinaryGrid::count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

std::size_t LocalMap::count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

bool Shape::contains(const Vec2& p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double dx = p.x() - center.x(), dy = p.y() - center.y();
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    if (type == ShapeType::Rectangle) {
        return std::abs(lx) <= 0.5 * size.x() + kTie && std::abs(ly) <= 0.5 * size.y() + kTie;
    }
    const double a = 0.5 * size.x(), b = 0.5 * size.y();
    return (lx * lx) / (a * a) + (ly * ly) / (b * b) <= 1.0 + kTie;
}

double Shape::bounding_radius() const {
    return type == ShapeType::Rectangle ? 0.5 * size.norm() : 0.5 * std::max(size.x(), size.y());
}

GridGeometry make_geometry(const Bounds& bounds, double resolution) {
    if (!(resolution > 0.0)) throw ContractError("grid resolution must be positive");
    if (!(bounds.max_x > bounds.min_x) || !(bounds.max_y > bounds.min_y)) throw ContractError("grid bounds are empty");
    GridGeometry g;
    g.resolution = resolution;
    g.origin = Pose2(bounds.min_x, bounds.min_y, 0.0);
    g.width = static_cast<int>(std::ceil(bounds.size_x() / resolution - 1e-9));
    g.height = static_cast<int>(std::ceil(bounds.size_y() / resolution - 1e-9));
    return g;
}

void stamp_shapes(OccupancyGrid& grid, std::span<const Shape> shapes) {
    const GridGeometry& g = grid.geom;
    for (const Shape& s : shapes) {
        if (!(s.size.x() > 0.0) || !(s.size.y() > 0.0)) throw InvalidShapeError("shape extents must be positive");
        if (s.height < 0.0) throw InvalidShapeError("shape height must be non-negative");
        const double r = s.bounding_radius() + g.resolution;
        // conservative cell window around the shape in grid-local coordinates
        const Vec2 local = g.origin.apply_inverse(s.center);
        const int x0 = std::max(0, static_cast<int>(std::floor((local.x() - r) / g.resolution)));
        const int x1 = std::min(g.width - 1, static_cast<int>(std::ceil((local.x() + r) / g.resolution)));
        const int y0 = std::max(0, static_cast<int>(std::floor((local.y() - r) / g.resolution)));
        const int y1 = std::min(g.height - 1, static_cast<int>(std::ceil((local.y() + r) / g.resolution)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (s.contains(g.cell_center(x, y))) {
                    double& h = grid.at(x, y);
                    h = std::max(h, s.height);
                }
            }
        }
    }
}

OccupancyGrid rasterize(std::span<const Shape> shapes, double resolution, const Bounds& bounds) {
    OccupancyGrid grid(make_geometry(bounds, resolution));
    stamp_shapes(grid, shapes);
    return grid;
}

OccupancyGrid stamp_dynamics(const OccupancyGrid& grid, std::span<const DynamicObstacle> dynamics) {
    OccupancyGrid out = grid;
    std::vector<Shape> shapes;
    shapes.reserve(dynamics.size());
    for (const auto& d : dynamics) shapes.push_back(d.shape);
    stamp_shapes(out, shapes);
    return out;
}

BinaryGrid threshold(const OccupancyGrid& grid, double height_threshold) {
    BinaryGrid out(grid.geom);
    for (std::size_t i = 0; i < grid.heights.size(); ++i) {
        const double h = grid.heights[i];
        out.cells[i] = (h > 0.0 && h >= height_threshold) ? 1 : 0;
    }
    return out;
}

BinaryGrid taller_than(const OccupancyGrid& grid, double min_height) {
    BinaryGrid out(grid.geom);
    for (std::size_t i = 0; i < grid.heights.size(); ++i) out.cells[i] = grid.heights[i] > min_height ? 1 : 0;
    return out;
}

std::vector<double> squared_distance_cells(const BinaryGrid& grid) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int w = grid.geom.width, h = grid.geom.height;
    std::vector<double> d(grid.geom.size(), kFar);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (grid.cells[i]) d[i] = 0.0;

    const int n = std::max(w, h);
    std::vector<double> f(n), out(n), z(n + 1);
    std::vector<int> v(n);
    // columns
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[y] = d[grid.geom.index(x, y)];
        edt_1d(f.data(), out.data(), h, v, z);
        for (int y = 0; y < h; ++y) d[grid.geom.index(x, y)] = out[y];
    }
    // rows
    for (int y = 0; y < h; ++y) {
        const std::size_t row = grid.geom.index(0, y);
        std::copy_n(d.begin() + row, w, f.begin());
        edt_1d(f.data(), out.data(), w, v, z);
        std::copy_n(out.begin(), w, d.begin() + row);
    }
    for (double& x : d)
        if (x >= 0.5 * kFar) x = inf;
    return d;
}

BinaryGrid inflate(const BinaryGrid& grid, double radius) {
    if (radius < 0.0) throw ContractError("inflation radius must be non-negative");
    if (radius == 0.0) return grid;
    const std::vector<double> d2 = squared_distance_cells(grid);
    const double limit = (radius + 1e-9) / grid.geom.resolution;
    const double limit2 = limit * limit;
    BinaryGrid out(grid.geom);
    for (std::size_t i = 0; i < d2.size(); ++i) out.cells[i] = d2[i] <= limit2 ? 1 : 0;
    return out;
}

BinaryGrid inflate(const OccupancyGrid& grid, double radius, double height_threshold) {
    return inflate(threshold(grid, height_threshold), radius);
}

LocalMap crop_local(const OccupancyGrid& grid, const Pose2& base, const LocalMapSpec& spec) {
    LocalMap m{spec, std::vector<std::uint8_t>(static_cast<std::size_t>(spec.cells) * spec.cells, 0)};
    const double half = 0.5 * spec.cells * spec.resolution;
    const double c = std::cos(base.theta), s = std::sin(base.theta);
    const GridGeometry& g = grid.geom;
    for (int j = 0; j < spec.cells; ++j) {
        const double ly = (j + 0.5) * spec.resolution - half;
        for (int i = 0; i < spec.cells; ++i) {
            const double lx = (i + 0.5) * spec.resolution - half;
            const Vec2 world(base.x + c * lx - s * ly, base.y + s * lx + c * ly);
            const Cell cell = g.cell_containing(world);
            const bool occ = !g.in_bounds(cell) || grid.at(cell.x, cell.y) > 0.0;
            m.cells[static_cast<std::size_t>(j) * spec.cells + i] = occ ? 1 : 0;
        }
    }
    return m;
}

LocalMapPair extract_local(const OccupancyGrid& grid, std::span<const DynamicObstacle> dynamics, const Pose2& base,
                           const LocalMapSpec& coarse, const LocalMapSpec& fine) {
    if (dynamics.empty()) return {crop_local(grid, base, coarse), crop_local(grid, base, fine)};
    const OccupancyGrid stamped = stamp_dynamics(grid, dynamics);
    return {crop_local(stamped, base, coarse), crop_local(stamped, base, fine)};
}

std::vector<DynamicObstacle> advance_dynamics(std::span<const DynamicObstacle> dynamics, double dt,
                                              const Bounds& bounds) {
    if (!(dt > 0.0)) throw ContractError("advance_dynamics: dt must be positive");
    std::vector<DynamicObstacle> out(dynamics.begin(), dynamics.end());
    for (auto& d : out) {
        Vec2& p = d.shape.center;
        p += d.velocity * dt;
        if (p.x() < bounds.min_x) {
            p.x() = 2.0 * bounds.min_x - p.x();
            d.velocity.x() = -d.velocity.x();
        } else if (p.x() > bounds.max_x) {
            p.x() = 2.0 * bounds.max_x - p.x();
            d.velocity.x() = -d.velocity.x();
        }
        if (p.y() < bounds.min_y) {
            p.y() = 2.0 * bounds.min_y - p.y();
            d.velocity.y() = -d.velocity.y();
        } else if (p.y() > bounds.max_y) {
            p.y() = 2.0 * bounds.max_y - p.y();
            d.velocity.y() = -d.velocity.y();
        }
    }
    return out;
}

OccupancyGrid WorldDescription::rasterize() const { return mmsim::rasterize(shapes, resolution, bounds); }

}  // namespace mmsim
