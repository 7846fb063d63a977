#pragma once

#include "mmsim/gridmap.h"

#include <vector>

namespace mmsim {

/// How a cell's weight enters the edge cost of a move of metric length
/// `len` (in cells) into that cell.
enum class WeightMode {
    ScaledByMoveLength,  ///< len * (1 + w)
    PerCell,             ///< len + w
};

/// Search graph for the planner: per-cell nonnegative weight plus a hard
/// block mask.
struct WeightMap {
    GridGeometry geom;
    std::vector<double> cost;
    std::vector<std::uint8_t> blocked;
    WeightMode mode = WeightMode::ScaledByMoveLength;

    WeightMap() = default;
    explicit WeightMap(const GridGeometry& g) : geom(g), cost(g.size(), 0.0), blocked(g.size(), 0) {}

    bool traversable(int x, int y) const { return geom.in_bounds(x, y) && !blocked[geom.index(x, y)]; }
    bool traversable(const Cell& c) const { return traversable(c.x, c.y); }

    /// Uniform zero weights, blocked wherever `occupied` is set.
    static WeightMap uniform(const BinaryGrid& occupied);

    double edge_cost(double move_len, std::size_t entered) const {
        return mode == WeightMode::ScaledByMoveLength ? move_len * (1.0 + cost[entered]) : move_len + cost[entered];
    }
};

struct GridPath {
    std::vector<Cell> cells;
    double cost = 0.0;
};

/// 8-connected neighbours of a cell as (dx, dy, length). Diagonal moves
/// are only allowed when both adjacent orthogonal cells are traversable.
struct Move {
    int dx;
    int dy;
    double len;
};
inline constexpr Move kMoves[8] = {{1, 0, 1.0},
                                   {-1, 0, 1.0},
                                   {0, 1, 1.0},
                                   {0, -1, 1.0},
                                   {1, 1, 1.4142135623730951},
                                   {1, -1, 1.4142135623730951},
                                   {-1, 1, 1.4142135623730951},
                                   {-1, -1, 1.4142135623730951}};

bool move_allowed(const WeightMap& w, const Cell& from, const Move& m);

/// Minimum-cost 8-connected path (octile heuristic, ties broken by lower
/// f, then g, then cell index). Throws NoPathError if either endpoint is
/// not traversable or the goal is unreachable.
GridPath plan_path_cells(const WeightMap& weights, const Cell& start, const Cell& goal);

/// World-coordinate variant; waypoints are cell centers.
std::vector<Vec2> plan_path(const WeightMap& weights, const Vec2& start, const Vec2& goal);

/// True iff the goal is reachable (no exception on failure).
bool path_exists(const WeightMap& weights, const Cell& start, const Cell& goal);

}  // namespace mmsim
