#include "mmsim/astar.h"

#include "mmsim/errors.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace mmsim {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
// Slightly deflated so the heuristic stays consistent under rounding.
constexpr double kHeuristicScale = 1.0 - 1e-12;

double octile(const Cell& a, const Cell& b) {
    const double dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
    return (std::max(dx, dy) - std::min(dx, dy)) + kSqrt2 * std::min(dx, dy);
}

struct OpenEntry {
    double f;
    double g;
    std::size_t idx;
    bool operator>(const OpenEntry& o) const {
        if (f != o.f) return f > o.f;
        if (g != o.g) return g > o.g;
        return idx > o.idx;
    }
};

}  // namespace

WeightMap WeightMap::uniform(const BinaryGrid& occupied) {
    WeightMap w(occupied.geom);
    w.blocked = occupied.cells;
    return w;
}

bool move_allowed(const WeightMap& w, const Cell& from, const Move& m) {
    if (!w.traversable(from.x + m.dx, from.y + m.dy)) return false;
    if (m.dx != 0 && m.dy != 0) {
        return w.traversable(from.x + m.dx, from.y) && w.traversable(from.x, from.y + m.dy);
    }
    return true;
}

GridPath plan_path_cells(const WeightMap& weights, const Cell& start, const Cell& goal) {
    const GridGeometry& g = weights.geom;
    if (!weights.traversable(start)) throw NoPathError("A*: start cell is not traversable");
    if (!weights.traversable(goal)) throw NoPathError("A*: goal cell is not traversable");

    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<double> best(g.size(), inf);
    std::vector<std::size_t> parent(g.size(), none);
    std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;

    const std::size_t s = g.index(start), t = g.index(goal);
    best[s] = 0.0;
    open.push({kHeuristicScale * octile(start, goal), 0.0, s});
    while (!open.empty()) {
        const OpenEntry e = open.top();
        open.pop();
        if (e.g > best[e.idx]) continue;
        if (e.idx == t) break;
        const Cell c = g.cell_of(e.idx);
        for (const Move& m : kMoves) {
            if (!move_allowed(weights, c, m)) continue;
            const Cell n{c.x + m.dx, c.y + m.dy};
            const std::size_t ni = g.index(n);
            const double ng = e.g + weights.edge_cost(m.len, ni);
            if (ng < best[ni]) {
                best[ni] = ng;
                parent[ni] = e.idx;
                open.push({ng + kHeuristicScale * octile(n, goal), ng, ni});
            }
        }
    }
    if (best[t] == inf) throw NoPathError("A*: goal unreachable");

    GridPath path;
    path.cost = best[t];
    for (std::size_t i = t; i != none; i = parent[i]) path.cells.push_back(g.cell_of(i));
    std::reverse(path.cells.begin(), path.cells.end());
    return path;
}

std::vector<Vec2> plan_path(const WeightMap& weights, const Vec2& start, const Vec2& goal) {
    const GridPath p = plan_path_cells(weights, weights.geom.cell_containing(start), weights.geom.cell_containing(goal));
    std::vector<Vec2> out;
    out.reserve(p.cells.size());
    for (const Cell& c : p.cells) out.push_back(weights.geom.cell_center(c));
    return out;
}

bool path_exists(const WeightMap& weights, const Cell& start, const Cell& goal) {
    try {
        plan_path_cells(weights, start, goal);
        return true;
    } catch (const NoPathError&) {
        return false;
    }
}

}  // namespace mmsim
