#include "mmsim/ee_motion.h"

#include "mmsim/errors.h"
#include "mmsim/rng.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mmsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Visits every cell a segment passes through, in order, until `pred`
// returns false. Exact corner crossings visit both side cells.
template <class Pred>
bool segment_all(const GridGeometry& g, const Vec2& a, const Vec2& b, Pred&& pred) {
    const Vec2 la = g.origin.apply_inverse(a) / g.resolution;
    const Vec2 lb = g.origin.apply_inverse(b) / g.resolution;
    int x = static_cast<int>(std::floor(la.x())), y = static_cast<int>(std::floor(la.y()));
    const int ex = static_cast<int>(std::floor(lb.x())), ey = static_cast<int>(std::floor(lb.y()));
    if (!pred(x, y)) return false;
    const double dx = lb.x() - la.x(), dy = lb.y() - la.y();
    const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    double tmx = sx == 0 ? kInf : (sx > 0 ? (x + 1 - la.x()) : (la.x() - x)) / std::abs(dx);
    double tmy = sy == 0 ? kInf : (sy > 0 ? (y + 1 - la.y()) : (la.y() - y)) / std::abs(dy);
    const double tdx = sx == 0 ? kInf : 1.0 / std::abs(dx);
    const double tdy = sy == 0 ? kInf : 1.0 / std::abs(dy);
    int guard = std::abs(ex - x) + std::abs(ey - y) + 4;
    while ((x != ex || y != ey) && guard-- > 0) {
        if (std::abs(tmx - tmy) <= 1e-12) {
            if (tmx > 1.0) break;
            if (!pred(x + sx, y) || !pred(x, y + sy)) return false;
            x += sx;
            y += sy;
            tmx += tdx;
            tmy += tdy;
        } else if (tmx < tmy) {
            if (tmx > 1.0) break;
            x += sx;
            tmx += tdx;
        } else {
            if (tmy > 1.0) break;
            y += sy;
            tmy += tdy;
        }
        if (!pred(x, y)) return false;
    }
    return true;
}

std::vector<double> cumulative(const std::vector<Vec2>& pts) {
    std::vector<double> s(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
    return s;
}

Vec2 point_at(const std::vector<Vec2>& pts, const std::vector<double>& s, double at) {
    if (at <= 0.0) return pts.front();
    if (at >= s.back()) return pts.back();
    const auto it = std::upper_bound(s.begin(), s.end(), at);
    const std::size_t i = static_cast<std::size_t>(it - s.begin()) - 1;
    const double seg = s[i + 1] - s[i];
    const double f = seg > 0.0 ? (at - s[i]) / seg : 0.0;
    return pts[i] + f * (pts[i + 1] - pts[i]);
}

bool samples_clear(const WeightMap& w, const std::vector<Vec2>& pts) {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!segment_all(w.geom, pts[i], pts[i + 1], [&](int x, int y) { return w.traversable(x, y); })) return false;
    }
    return pts.size() != 1 || [&] {
        const Cell c = w.geom.cell_containing(pts[0]);
        return w.traversable(c);
    }();
}

// Closest free cell to `c` within `radius` cells (squared distance, then
// index); nullopt if none.
std::optional<Cell> nearest_free(const WeightMap& w, const Cell& c, double radius) {
    if (w.traversable(c)) return c;
    const int r = static_cast<int>(std::floor(radius));
    std::optional<Cell> best;
    double best_d2 = kInf;
    for (int y = std::max(0, c.y - r); y <= std::min(w.geom.height - 1, c.y + r); ++y) {
        for (int x = std::max(0, c.x - r); x <= std::min(w.geom.width - 1, c.x + r); ++x) {
            const double d2 = double(x - c.x) * (x - c.x) + double(y - c.y) * (y - c.y);
            if (d2 > radius * radius || !w.traversable(x, y)) continue;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = Cell{x, y};
            }
        }
    }
    return best;
}

const char* weight_mode_name(WeightMode m) { return m == WeightMode::PerCell ? "per_cell" : "scaled"; }

}  // namespace

std::string to_string(MotionKind k) {
    switch (k) {
        case MotionKind::Slerp: return "slerp";
        case MotionKind::Fwd: return "fwd";
        case MotionKind::Spline: return "spline";
    }
    return "slerp";
}

MotionKind motion_kind_from_string(const std::string& s) {
    if (s == "slerp") return MotionKind::Slerp;
    if (s == "fwd") return MotionKind::Fwd;
    if (s == "spline") return MotionKind::Spline;
    throw ConfigError("unknown motion kind '" + s + "' (expected slerp, fwd or spline)");
}

void MotionConfig::validate() const {
    if (!(weight_c > 0.0)) throw ConfigError("motion: weight_c must be positive");
    if (d_ee < 0.0 || height_margin < 0.0 || collision_margin < 0.0) throw ConfigError("motion: negative margin");
    if (d_base && *d_base < 0.0) throw ConfigError("motion: d_base must be non-negative");
    if (!(lds_gain > 0.0) || !(nominal_speed > 0.0) || !(sample_spacing > 0.0))
        throw ConfigError("motion: lds_gain, nominal_speed and sample_spacing must be positive");
    if (lds_gain * sample_spacing / nominal_speed > 1.0) throw ConfigError("motion: smoothing rate above 1 per sample");
    if (fwd_blend < 0.0 || !(lookahead > 0.0) || !(tracking_threshold > 0.0))
        throw ConfigError("motion: invalid blend, lookahead or tracking threshold");
    if (spline_waypoints < 2) throw ConfigError("motion: spline_waypoints must be at least 2");
    if (!(spline_spacing.min > 0.0) || !(spline_spacing.min <= spline_spacing.max))
        throw ConfigError("motion: invalid spline_spacing");
}

MotionConfig motion_config_from_json(const json& j) {
    MotionConfig c;
    try {
        c.weight_c = j.value("weight_c", c.weight_c);
        c.d_ee = j.value("d_ee", c.d_ee);
        if (j.contains("d_base") && !j.at("d_base").is_null()) c.d_base = j.at("d_base").get<double>();
        c.height_margin = j.value("height_margin", c.height_margin);
        c.collision_margin = j.value("collision_margin", c.collision_margin);
        const std::string mode = j.value("weight_mode", std::string("scaled"));
        if (mode == "scaled") {
            c.weight_mode = WeightMode::ScaledByMoveLength;
        } else if (mode == "per_cell") {
            c.weight_mode = WeightMode::PerCell;
        } else {
            throw ConfigError("motion: unknown weight_mode '" + mode + "'");
        }
        c.lds_gain = j.value("lds_gain", c.lds_gain);
        c.nominal_speed = j.value("nominal_speed", c.nominal_speed);
        c.sample_spacing = j.value("sample_spacing", c.sample_spacing);
        c.fwd_blend = j.value("fwd_blend", c.fwd_blend);
        c.lookahead = j.value("lookahead", c.lookahead);
        c.tracking_threshold = j.value("tracking_threshold", c.tracking_threshold);
        c.spline_waypoints = j.value("spline_waypoints", c.spline_waypoints);
        if (j.contains("spline_spacing")) {
            c.spline_spacing = {j.at("spline_spacing").at(0).get<double>(), j.at("spline_spacing").at(1).get<double>()};
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("motion config: ") + e.what());
    }
    c.validate();
    return c;
}

json motion_config_to_json(const MotionConfig& c) {
    json j{{"weight_c", c.weight_c},
           {"d_ee", c.d_ee},
           {"height_margin", c.height_margin},
           {"collision_margin", c.collision_margin},
           {"weight_mode", weight_mode_name(c.weight_mode)},
           {"lds_gain", c.lds_gain},
           {"nominal_speed", c.nominal_speed},
           {"sample_spacing", c.sample_spacing},
           {"fwd_blend", c.fwd_blend},
           {"lookahead", c.lookahead},
           {"tracking_threshold", c.tracking_threshold},
           {"spline_waypoints", c.spline_waypoints},
           {"spline_spacing", json::array({c.spline_spacing.min, c.spline_spacing.max})}};
    j["d_base"] = c.d_base ? json(*c.d_base) : json(nullptr);
    return j;
}

WeightMap build_weights(const OccupancyGrid& world, const Pose2& base_start, const Pose3& goal, const WeightParams& p,
                        GridPath* base_path) {
    const GridGeometry& g = world.geom;
    const WeightMap base_w = WeightMap::uniform(inflate(world, p.footprint_radius, 0.0));
    const double reach_cells = p.d_base / g.resolution;
    const auto s = nearest_free(base_w, g.cell_containing(base_start.position()), reach_cells);
    const auto t = nearest_free(base_w, g.cell_containing(goal.position.head<2>()), reach_cells);
    if (!s || !t) throw BasePathInfeasibleError("build_weights: base start or goal region is not free");
    GridPath bp;
    try {
        bp = plan_path_cells(base_w, *s, *t);
    } catch (const NoPathError& e) {
        throw BasePathInfeasibleError(std::string("build_weights: no base path: ") + e.what());
    }

    BinaryGrid path_grid(g);
    for (const Cell& c : bp.cells) path_grid.set(c.x, c.y, true);
    const BinaryGrid corridor = inflate(path_grid, p.d_base);
    // one distance field serves both radii around the tall obstacles
    const std::vector<double> tall_d2 = squared_distance_cells(taller_than(world, p.max_z));
    auto within = [&](double r2cells, std::size_t i) { return tall_d2[i] <= r2cells; };
    const double ee_lim = (p.d_ee + 1e-9) / g.resolution, hard_lim = (p.collision_margin + 1e-9) / g.resolution;

    WeightMap w(g);
    w.mode = p.mode;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double near_tall = within(ee_lim * ee_lim, i) ? 1.0 : 0.0;
        w.cost[i] = p.c * (near_tall + (1.0 - double(corridor.cells[i])));
        w.blocked[i] = within(hard_lim * hard_lim, i) ? 1 : 0;
    }
    if (base_path) *base_path = std::move(bp);
    return w;
}

Pose3 EEMotionPlan::pose_at(double s) const {
    if (poses.empty()) throw ContractError("pose_at on an empty plan");
    if (s <= 0.0) return poses.front();
    if (s >= length()) return poses.back();
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arc.begin()) - 1;
    const double seg = arc[i + 1] - arc[i];
    const double f = seg > 0.0 ? (s - arc[i]) / seg : 0.0;
    if (f == 0.0) return poses[i];
    return Pose3(poses[i].position + f * (poses[i + 1].position - poses[i].position),
                 slerp(poses[i].orientation, poses[i + 1].orientation, f));
}

double EEMotionPlan::project(const Vec3& p, std::optional<double> hint) const {
    if (poses.empty()) throw ContractError("project on an empty plan");
    if (poses.size() == 1) return 0.0;
    auto search = [&](std::size_t lo, std::size_t hi) {
        double best_s = arc[lo], best_d = kInf;
        for (std::size_t i = lo; i < hi; ++i) {
            const Vec3 a = poses[i].position, d = poses[i + 1].position - a;
            const double l2 = d.squaredNorm();
            const double f = l2 > 0.0 ? std::clamp((p - a).dot(d) / l2, 0.0, 1.0) : 0.0;
            const double dist = (a + f * d - p).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best_s = arc[i] + f * (arc[i + 1] - arc[i]);
            }
        }
        return std::pair{best_s, best_d};
    };
    const std::size_t n = poses.size() - 1;
    if (hint) {
        const auto lo = std::upper_bound(arc.begin(), arc.end(), *hint - 0.25) - arc.begin();
        const auto hi = std::upper_bound(arc.begin(), arc.end(), *hint + 0.5) - arc.begin();
        const std::size_t l = lo > 0 ? static_cast<std::size_t>(lo) - 1 : 0;
        const std::size_t h = std::min(n, static_cast<std::size_t>(hi));
        if (l < h) return search(l, h).first;
    }
    return search(0, n).first;
}

EEMotionPlan make_plan(std::vector<Pose3> poses, MotionKind kind, const Pose3& goal, double spacing) {
    if (poses.empty()) throw ContractError("make_plan: no poses");
    EEMotionPlan plan;
    plan.kind = kind;
    plan.goal = goal;
    plan.poses.reserve(poses.size());
    plan.poses.push_back(poses.front());
    for (std::size_t i = 1; i < poses.size(); ++i) {
        const Pose3& a = poses[i - 1];
        const Pose3& b = poses[i];
        const double gap = (b.position - a.position).norm();
        const int pieces = static_cast<int>(std::ceil(gap / spacing - 1e-9));
        for (int k = 1; k < pieces; ++k) {
            const double f = double(k) / pieces;
            plan.poses.emplace_back(a.position + f * (b.position - a.position), slerp(a.orientation, b.orientation, f));
        }
        // zero-length steps that only rotate are merged into the next sample
        if (gap == 0.0 && i + 1 < poses.size()) continue;
        if (gap == 0.0) {
            plan.poses.back() = b;
            continue;
        }
        plan.poses.push_back(b);
    }
    plan.arc.assign(plan.poses.size(), 0.0);
    for (std::size_t i = 1; i < plan.poses.size(); ++i)
        plan.arc[i] = plan.arc[i - 1] + (plan.poses[i].position - plan.poses[i - 1].position).norm();
    return plan;
}

std::vector<Vec2> shortcut_path(const WeightMap& weights, const std::vector<Vec2>& wp) {
    if (wp.size() <= 2) return wp;
    const GridGeometry& g = weights.geom;
    auto seg_max = [&](const Vec2& a, const Vec2& b) {
        double m = 0.0;
        segment_all(g, a, b, [&](int x, int y) {
            if (g.in_bounds(x, y)) m = std::max(m, weights.cost[g.index(x, y)]);
            return true;
        });
        return m;
    };
    std::vector<Vec2> out{wp.front()};
    std::size_t i = 0;
    while (i + 1 < wp.size()) {
        std::size_t best = i + 1;
        double sub_max = seg_max(wp[i], wp[i + 1]);
        for (std::size_t j = i + 2; j < wp.size(); ++j) {
            sub_max = std::max(sub_max, seg_max(wp[j - 1], wp[j]));
            const bool ok = segment_all(g, wp[i], wp[j], [&](int x, int y) {
                return weights.traversable(x, y) && weights.cost[g.index(x, y)] <= sub_max;
            });
            if (!ok) break;
            best = j;
        }
        out.push_back(wp[best]);
        i = best;
    }
    return out;
}

std::vector<Vec2> resample(const std::vector<Vec2>& in, double spacing) {
    std::vector<Vec2> pts;
    for (const Vec2& p : in)
        if (pts.empty() || (p - pts.back()).norm() > 0.0) pts.push_back(p);
    if (pts.size() < 2) return pts;
    const std::vector<double> s = cumulative(pts);
    const double len = s.back();
    const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
    std::vector<Vec2> out;
    out.reserve(n + 1);
    out.push_back(pts.front());
    for (int k = 1; k < n; ++k) out.push_back(point_at(pts, s, len * k / n));
    out.push_back(pts.back());
    return out;
}

std::vector<Vec2> lds_smooth(const std::vector<Vec2>& wp, double alpha, double spacing) {
    if (wp.size() < 2) return wp;
    const std::vector<double> s = cumulative(wp);
    const double len = s.back();
    if (len == 0.0) return {wp.front()};
    const Vec2 goal = wp.back();
    std::vector<Vec2> raw{wp.front()};
    Vec2 x = wp.front();
    double at = 0.0;
    const std::size_t limit = static_cast<std::size_t>(len / spacing) + 10000;
    while (raw.size() < limit) {
        at = std::min(at + spacing, len);
        x += alpha * (point_at(wp, s, at) - x);
        if (at >= len && (x - goal).norm() < 1e-6) break;
        raw.push_back(x);
    }
    raw.push_back(goal);
    return resample(raw, spacing);
}

EEMotionPlan smooth_and_lift(const std::vector<Vec2>& waypoints, const Pose3& start, const Pose3& goal,
                             const OccupancyGrid& world, const WeightMap& weights, const MotionConfig& cfg) {
    if (waypoints.empty()) throw ContractError("smooth_and_lift: no waypoints");
    const double spacing = cfg.sample_spacing;
    const std::vector<Vec2> shortcut = shortcut_path(weights, waypoints);
    const double alpha = cfg.lds_gain * spacing / cfg.nominal_speed;
    std::vector<Vec2> pts = lds_smooth(shortcut, alpha, spacing);
    if (!samples_clear(weights, pts)) {
        pts = resample(shortcut, spacing);
        if (!samples_clear(weights, pts)) pts = resample(waypoints, spacing);
    }
    if (pts.empty()) pts.push_back(waypoints.front());

    const std::vector<double> s = cumulative(pts);
    const double len = s.back();
    const std::size_t n = pts.size();

    // obstacle runs under the path, widened by one sample on each side
    std::vector<std::pair<double, double>> knots{{0.0, start.position.z()}};
    const GridGeometry& g = world.geom;
    auto height_at = [&](const Vec2& p) {
        const Cell c = g.cell_containing(p);
        return g.in_bounds(c) ? world.at(c.x, c.y) : 0.0;
    };
    std::size_t i = 0;
    while (i < n) {
        if (height_at(pts[i]) <= 0.0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double h = 0.0;
        while (j < n && height_at(pts[j]) > 0.0) h = std::max(h, height_at(pts[j++]));
        const double z_req = std::max(h + cfg.height_margin, goal.position.z());
        const double sa = s[i > 0 ? i - 1 : 0];
        const double sb = s[std::min(j, n - 1)];
        knots.emplace_back(std::max(sa, knots.back().first), z_req);
        knots.emplace_back(sb, z_req);
        i = j;
    }
    knots.emplace_back(len, goal.position.z());

    auto z_at = [&](double at) {
        if (at <= 0.0) return start.position.z();
        if (at >= len) return goal.position.z();
        std::size_t k = 0;
        for (std::size_t m = 0; m < knots.size(); ++m)
            if (knots[m].first <= at) k = m;
        const auto& [s0, z0] = knots[k];
        const auto& [s1, z1] = knots[k + 1];
        return s1 > s0 ? z0 + (z1 - z0) * (at - s0) / (s1 - s0) : z1;
    };

    std::vector<Pose3> poses;
    poses.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = len > 0.0 ? s[k] / len : 1.0;
        poses.emplace_back(Vec3(pts[k].x(), pts[k].y(), z_at(s[k])), slerp(start.orientation, goal.orientation, f));
    }
    if (n == 1) {
        poses = {start, goal};
    } else {
        poses.front() = start;
        poses.back() = goal;
    }
    return make_plan(std::move(poses), MotionKind::Slerp, goal, spacing);
}

EEMotionPlan orientation_fwd(const EEMotionPlan& plan, double blend) {
    EEMotionPlan out = plan;
    out.kind = MotionKind::Fwd;
    const std::size_t n = plan.poses.size();
    if (n < 2) return out;
    const double len = plan.length();
    const Quat q0 = plan.poses.front().orientation;
    const Quat qg = plan.poses.back().orientation;
    if (len <= 2.0 * blend) {
        for (std::size_t i = 0; i < n; ++i) out.poses[i].orientation = slerp(q0, qg, plan.arc[i] / len);
        return out;
    }
    double yaw = yaw_of(q0);
    constexpr std::size_t kHalf = 3;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 d = plan.poses[std::min(i + kHalf, n - 1)].position - plan.poses[i > kHalf ? i - kHalf : 0].position;
        if (d.head<2>().norm() > 1e-9) yaw = std::atan2(d.y(), d.x());
        Quat q = yaw_quat(yaw);
        const double s = plan.arc[i];
        if (s < blend) q = slerp(q0, q, s / blend);
        if (s > len - blend) q = slerp(q, qg, (s - (len - blend)) / blend);
        out.poses[i].orientation = q;
    }
    out.poses.front().orientation = q0;
    out.poses.back().orientation = qg;
    return out;
}

CubicSpline::CubicSpline(const std::vector<Vec3>& pts) : p(pts) {
    const std::size_t n = pts.size();
    if (n < 2) throw ContractError("CubicSpline needs at least two points");
    t.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double d = (pts[i] - pts[i - 1]).norm();
        if (!(d > 0.0)) throw ContractError("CubicSpline: repeated knot");
        t[i] = t[i - 1] + d;
    }
    m.assign(n, Vec3::Zero());
    if (n == 2) return;
    // tridiagonal system for the interior second derivatives (Thomas)
    const std::size_t k = n - 2;
    std::vector<double> a(k), b(k), c(k);
    std::vector<Vec3> r(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
        a[i - 1] = h0 / 6.0;
        b[i - 1] = (h0 + h1) / 3.0;
        c[i - 1] = h1 / 6.0;
        r[i - 1] = (pts[i + 1] - pts[i]) / h1 - (pts[i] - pts[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < k; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        r[i] -= w * r[i - 1];
    }
    m[k] = r[k - 1] / b[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = (r[i] - c[i] * m[i + 2]) / b[i];
}

namespace {

std::size_t spline_segment(const std::vector<double>& t, double tt) {
    if (tt <= t.front()) return 0;
    if (tt >= t.back()) return t.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), tt) - t.begin()) - 1;
}

}  // namespace

Vec3 CubicSpline::eval(double tt) const {
    tt = std::clamp(tt, t.front(), t.back());
    const std::size_t i = spline_segment(t, tt);
    const double h = t[i + 1] - t[i];
    const double A = (t[i + 1] - tt) / h, B = (tt - t[i]) / h;
    return A * p[i] + B * p[i + 1] + ((A * A * A - A) * m[i] + (B * B * B - B) * m[i + 1]) * (h * h / 6.0);
}

Vec3 CubicSpline::derivative(double tt) const {
    tt = std::clamp(tt, t.front(), t.back());
    const std::size_t i = spline_segment(t, tt);
    const double h = t[i + 1] - t[i];
    const double A = (t[i + 1] - tt) / h, B = (tt - t[i]) / h;
    return (p[i + 1] - p[i]) / h + ((1.0 - 3.0 * A * A) * m[i] + (3.0 * B * B - 1.0) * m[i + 1]) * (h / 6.0);
}

EEMotionPlan spline_motion(const Pose3& start, int n_waypoints, std::uint64_t seed, const Range& z_range,
                           const MotionConfig& cfg, const std::optional<Bounds>& bounds, std::vector<Pose3>* waypoints) {
    if (n_waypoints < 2) throw ContractError("spline_motion: needs at least two waypoints");
    Rng rng(mix_seed(seed, 3));
    std::vector<Pose3> wps{start};
    for (int i = 1; i < n_waypoints; ++i) {
        const Vec3 prev = wps.back().position;
        Vec2 xy = prev.head<2>();
        for (int tries = 0; tries < 100; ++tries) {
            const double d = rng.uniform(cfg.spline_spacing.min, cfg.spline_spacing.max);
            const double h = rng.uniform(-std::numbers::pi, std::numbers::pi);
            xy = prev.head<2>() + d * Vec2(std::cos(h), std::sin(h));
            if (!bounds || bounds->contains(xy)) break;
        }
        const double z = rng.uniform(z_range.min, z_range.max);
        wps.emplace_back(Vec3(xy.x(), xy.y(), z), rng.unit_quaternion());
    }
    std::vector<Vec3> pts;
    for (const Pose3& w : wps) pts.push_back(w.position);
    const CubicSpline spline(pts);

    std::vector<Pose3> poses;
    for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
        const double t0 = spline.t[i], h = spline.t[i + 1] - t0;
        double est = 0.0;
        Vec3 last = pts[i];
        for (int k = 1; k <= 64; ++k) {
            const Vec3 q = spline.eval(t0 + h * k / 64.0);
            est += (q - last).norm();
            last = q;
        }
        const int pieces = std::max(1, static_cast<int>(std::ceil(est / cfg.sample_spacing)));
        poses.push_back(wps[i]);
        for (int k = 1; k < pieces; ++k) {
            const double f = double(k) / pieces;
            poses.emplace_back(spline.eval(t0 + h * f), slerp(wps[i].orientation, wps[i + 1].orientation, f));
        }
    }
    poses.push_back(wps.back());
    if (waypoints) *waypoints = wps;
    return make_plan(std::move(poses), MotionKind::Spline, wps.back(), cfg.sample_spacing);
}

EEMotionPlan plan_ee_motion(const OccupancyGrid& world, const RobotModel& robot, const Pose2& base, const Pose3& start,
                            const Pose3& goal, MotionKind kind, const MotionConfig& cfg) {
    WeightParams wp;
    wp.c = cfg.weight_c;
    wp.d_ee = cfg.d_ee;
    wp.d_base = cfg.d_base.value_or(robot.arm_reach);
    wp.max_z = robot.constraints.goal_height.max - cfg.height_margin;
    wp.collision_margin = cfg.collision_margin;
    wp.footprint_radius = robot.footprint_radius;
    wp.mode = cfg.weight_mode;
    WeightMap w = build_weights(world, base, goal, wp);

    const GridGeometry& g = world.geom;
    const auto sc = g.world_to_cell(start.position.head<2>());
    const auto gc = g.world_to_cell(goal.position.head<2>());
    if (!sc || !gc) throw NoPathError("plan_ee_motion: start or goal outside the map");
    // the EE may already sit inside the margin of an obstacle that moved
    w.blocked[g.index(*sc)] = 0;
    const GridPath path = plan_path_cells(w, *sc, *gc);

    std::vector<Vec2> wps;
    wps.reserve(path.cells.size() + 1);
    for (const Cell& c : path.cells) wps.push_back(g.cell_center(c));
    wps.front() = start.position.head<2>();
    if (wps.size() == 1) {
        wps.push_back(goal.position.head<2>());
    } else {
        wps.back() = goal.position.head<2>();
    }
    EEMotionPlan plan = smooth_and_lift(wps, start, goal, world, w, cfg);
    if (kind == MotionKind::Fwd) plan = orientation_fwd(plan, cfg.fwd_blend);
    return plan;
}

MotionStep next_velocity(const EEMotionPlan& plan, const MotionQuery& q, double dt, double lookahead,
                         double tracking, std::optional<double> hint) {
    if (!(dt > 0.0)) throw ContractError("next_velocity: dt must be positive");
    if (q.step < 0.0) throw ContractError("next_velocity: negative step length");
    const double s = plan.project(q.pose.position, hint);
    const Pose3 here = plan.pose_at(s);
    const double off = (here.position - q.pose.position).norm();
    if (off > tracking) {
        throw OffPlanError("next_velocity: query pose " + std::to_string(off) + " m from the plan");
    }
    const double len = plan.length();
    const double step = std::min(q.step, len - s);
    MotionStep out;
    out.arc = s + step;
    out.desired = step > 0.0 ? plan.pose_at(out.arc) : here;
    const Vec3 d = out.desired.position - here.position;
    if (step > 0.0 && d.norm() > 0.0) out.velocity = d.normalized() * (step / dt);
    out.intermediate_goal = plan.pose_at(std::min(s + lookahead, len));
    return out;
}

MotionGenerator::MotionGenerator(RobotModel robot, MotionConfig cfg, MotionKind kind)
    : robot_(std::move(robot)), cfg_(std::move(cfg)), kind_(kind) {
    cfg_.validate();
}

const EEMotionPlan& MotionGenerator::start(const OccupancyGrid& world, const Pose2& base, const Pose3& ee,
                                           const Pose3& goal, std::uint64_t seed, const Range& z_range) {
    blocked_ = false;
    if (kind_ == MotionKind::Spline) {
        const GridGeometry& g = world.geom;
        const Bounds b{g.origin.x, g.origin.y, g.origin.x + g.width * g.resolution,
                       g.origin.y + g.height * g.resolution};
        plan_ = spline_motion(ee, cfg_.spline_waypoints, seed, z_range, cfg_, b);
        goal_ = plan_.goal;
    } else {
        plan_ = plan_ee_motion(world, robot_, base, ee, goal, kind_, cfg_);
        goal_ = goal;
    }
    snapshot_ = world.heights;
    return plan_;
}

bool MotionGenerator::replan(const OccupancyGrid& world_now, const Pose2& base_now, const Pose3& ee_now, bool force) {
    if (kind_ == MotionKind::Spline) return false;
    if (!force && world_now.heights == snapshot_) return false;
    try {
        plan_ = plan_ee_motion(world_now, robot_, base_now, ee_now, goal_, kind_, cfg_);
    } catch (const NoPathError&) {
        blocked_ = true;
        return false;
    }
    snapshot_ = world_now.heights;
    blocked_ = false;
    return true;
}

std::string plan_to_jsonl(const EEMotionPlan& plan) {
    std::ostringstream os;
    for (std::size_t i = 0; i < plan.poses.size(); ++i) {
        const json rec{{"arc", plan.arc[i]},
                       {"position", to_json(plan.poses[i].position)},
                       {"quaternion", quat_to_json(plan.poses[i].orientation)}};
        os << rec.dump() << '\n';
    }
    return os.str();
}

}  // namespace mmsim
