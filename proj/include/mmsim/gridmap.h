#pragma once

#include "mmsim/geometry.h"
#include "mmsim/json_util.h"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mmsim {

struct Bounds {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double size_x() const { return max_x - min_x; }
    double size_y() const { return max_y - min_y; }
    bool contains(const Vec2& p) const { return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y; }
};

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Cell (0,0) has its lower-left corner at `origin`; cell (i,j) covers
/// [i*res, (i+1)*res) x [j*res, (j+1)*res) in the origin frame.
struct GridGeometry {
    double resolution = 0.025;
    Pose2 origin;
    int width = 0;
    int height = 0;

    std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    bool in_bounds(const Cell& c) const { return in_bounds(c.x, c.y); }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t index(const Cell& c) const { return index(c.x, c.y); }
    Cell cell_of(std::size_t idx) const { return {static_cast<int>(idx % width), static_cast<int>(idx / width)}; }

    Vec2 cell_center(int x, int y) const;
    Vec2 cell_center(const Cell& c) const { return cell_center(c.x, c.y); }
    /// Cell containing the world point (may be out of bounds).
    Cell cell_containing(const Vec2& world) const;
    std::optional<Cell> world_to_cell(const Vec2& world) const;

    friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
        return a.resolution == b.resolution && a.origin.x == b.origin.x && a.origin.y == b.origin.y &&
               a.origin.theta == b.origin.theta && a.width == b.width && a.height == b.height;
    }
};

/// Per-cell obstacle height in meters; 0 means free.
struct OccupancyGrid {
    GridGeometry geom;
    std::vector<double> heights;

    OccupancyGrid() = default;
    explicit OccupancyGrid(const GridGeometry& g) : geom(g), heights(g.size(), 0.0) {}

    double at(int x, int y) const { return heights[geom.index(x, y)]; }
    double& at(int x, int y) { return heights[geom.index(x, y)]; }
    double max_height() const;
};

struct BinaryGrid {
    GridGeometry geom;
    std::vector<std::uint8_t> cells;

    BinaryGrid() = default;
    explicit BinaryGrid(const GridGeometry& g) : geom(g), cells(g.size(), 0) {}

    bool at(int x, int y) const { return cells[geom.index(x, y)] != 0; }
    bool at(const Cell& c) const { return at(c.x, c.y); }
    void set(int x, int y, bool v) { cells[geom.index(x, y)] = v ? 1 : 0; }
    std::size_t count() const;
};

enum class ShapeType { Rectangle, Ellipse };

/// Elementary obstacle footprint. `size` is the full extent along the
/// shape's local x/y axes (width, breadth); for ellipses the semi-axes are
/// size / 2.
struct Shape {
    ShapeType type = ShapeType::Rectangle;
    Vec2 center = Vec2::Zero();
    Vec2 size = Vec2::Ones();
    double rotation = 0.0;
    double height = 1.0;

    /// Boundary points count as inside.
    bool contains(const Vec2& p) const;
    double bounding_radius() const;
};

struct DynamicObstacle {
    Shape shape;
    Vec2 velocity = Vec2::Zero();

    Pose2 pose() const { return {shape.center.x(), shape.center.y(), shape.rotation}; }
};

GridGeometry make_geometry(const Bounds& bounds, double resolution);

/// Rasterizes shapes by cell-center containment; a cell holds the max height
/// of covering shapes. Throws InvalidShapeError on non-positive extents.
OccupancyGrid rasterize(std::span<const Shape> shapes, double resolution, const Bounds& bounds);

/// Adds shapes into an existing grid (max of heights).
void stamp_shapes(OccupancyGrid& grid, std::span<const Shape> shapes);
OccupancyGrid stamp_dynamics(const OccupancyGrid& grid, std::span<const DynamicObstacle> dynamics);

/// Cells with 0 < height and height >= threshold.
BinaryGrid threshold(const OccupancyGrid& grid, double height_threshold);
/// Cells with height strictly above `min_height`.
BinaryGrid taller_than(const OccupancyGrid& grid, double min_height);

/// Exact squared Euclidean distance (in cells) from each cell center to the
/// nearest occupied cell center; +inf when nothing is occupied.
std::vector<double> squared_distance_cells(const BinaryGrid& grid);

/// Occupied iff the nearest occupied cell center is within `radius` meters.
BinaryGrid inflate(const BinaryGrid& grid, double radius);
BinaryGrid inflate(const OccupancyGrid& grid, double radius, double height_threshold);

struct LocalMapSpec {
    int cells = 30;
    double resolution = 0.1;
};

/// Square binary crop aligned with the base: cell (i, j) has i along the
/// base x axis (forward) and j along base y (left), centered on the base.
struct LocalMap {
    LocalMapSpec spec;
    std::vector<std::uint8_t> cells;

    bool at(int i, int j) const { return cells[static_cast<std::size_t>(j) * spec.cells + i] != 0; }
    std::size_t count() const;
};

struct LocalMapPair {
    LocalMap coarse;
    LocalMap fine;
};

inline constexpr LocalMapSpec kCoarseLocalMap{30, 0.1};
inline constexpr LocalMapSpec kFineLocalMap{30, 0.025};

LocalMap crop_local(const OccupancyGrid& grid, const Pose2& base, const LocalMapSpec& spec);

/// Dynamic obstacles are stamped at their current pose before cropping.
/// Out-of-map cells are occupied; occupancy means height > 0.
LocalMapPair extract_local(const OccupancyGrid& grid, std::span<const DynamicObstacle> dynamics, const Pose2& base,
                           const LocalMapSpec& coarse = kCoarseLocalMap, const LocalMapSpec& fine = kFineLocalMap);

/// Euler step; centers leaving `bounds` are mirrored back and the normal
/// velocity component is negated.
std::vector<DynamicObstacle> advance_dynamics(std::span<const DynamicObstacle> dynamics, double dt,
                                              const Bounds& bounds);

/// Serializable world: the structured text world file.
struct WorldDescription {
    Bounds bounds;
    double resolution = 0.025;
    std::vector<Shape> shapes;
    std::vector<DynamicObstacle> dynamics;

    OccupancyGrid rasterize() const;
};

json world_to_json(const WorldDescription& w);
/// Throws ParseError on malformed input, InvalidShapeError on bad extents.
WorldDescription world_from_json(const json& j);

}  // namespace mmsim
