#include <doctest.h>

#include "mmsim/astar.h"
#include "mmsim/errors.h"
#include "mmsim/rng.h"
#include "oracles.h"

#include <cmath>

using namespace mmsim;

namespace {

GridGeometry square(int n, double res = 0.1) {
    GridGeometry g;
    g.resolution = res;
    g.width = g.height = n;
    return g;
}

WeightMap random_map(Rng& rng, int n, WeightMode mode) {
    WeightMap w(square(n));
    w.mode = mode;
    for (std::size_t i = 0; i < w.cost.size(); ++i) {
        w.blocked[i] = rng.bernoulli(0.2) ? 1 : 0;
        w.cost[i] = rng.bernoulli(0.3) ? rng.uniform(0.0, 10.0) : 0.0;
    }
    return w;
}

void check_path_shape(const WeightMap& w, const GridPath& p, const Cell& s, const Cell& g) {
    REQUIRE_FALSE(p.cells.empty());
    CHECK(p.cells.front() == s);
    CHECK(p.cells.back() == g);
    for (std::size_t i = 0; i < p.cells.size(); ++i) {
        CHECK(w.traversable(p.cells[i]));
        if (i == 0) continue;
        const int dx = p.cells[i].x - p.cells[i - 1].x, dy = p.cells[i].y - p.cells[i - 1].y;
        CHECK(std::abs(dx) <= 1);
        CHECK(std::abs(dy) <= 1);
        CHECK((dx != 0 || dy != 0));
        if (dx != 0 && dy != 0) {
            CHECK(w.traversable(p.cells[i - 1].x + dx, p.cells[i - 1].y));
            CHECK(w.traversable(p.cells[i - 1].x, p.cells[i - 1].y + dy));
        }
    }
}

}  // namespace

TEST_CASE("open grid: straight and diagonal costs") {
    WeightMap w(square(10));
    const GridPath p = plan_path_cells(w, {0, 0}, {9, 0});
    CHECK(p.cost == doctest::Approx(9.0));
    CHECK(p.cells.size() == 10);
    const GridPath d = plan_path_cells(w, {0, 0}, {9, 9});
    CHECK(d.cost == doctest::Approx(9.0 * std::sqrt(2.0)));
    const GridPath o = plan_path_cells(w, {0, 0}, {9, 4});
    CHECK(o.cost == doctest::Approx(5.0 + 4.0 * std::sqrt(2.0)));
    const GridPath same = plan_path_cells(w, {3, 3}, {3, 3});
    CHECK(same.cells.size() == 1);
    CHECK(same.cost == 0.0);
}

TEST_CASE("wall with a single gap forces the path through the gap") {
    WeightMap w(square(11));
    for (int y = 0; y < 11; ++y)
        if (y != 8) w.blocked[w.geom.index(5, y)] = 1;
    const GridPath p = plan_path_cells(w, {1, 1}, {9, 1});
    check_path_shape(w, p, {1, 1}, {9, 1});
    bool through = false;
    for (const Cell& c : p.cells) through |= c == Cell{5, 8};
    CHECK(through);
    CHECK(p.cost == doctest::Approx(oracle::dijkstra(w, 1, 1, 9, 1)));
}

TEST_CASE("no corner cutting between two diagonal blocks") {
    WeightMap w(square(3));
    w.blocked[w.geom.index(1, 0)] = 1;
    w.blocked[w.geom.index(0, 1)] = 1;
    CHECK_THROWS_AS(plan_path_cells(w, {0, 0}, {1, 1}), NoPathError);
    CHECK_FALSE(path_exists(w, {0, 0}, {2, 2}));
}

TEST_CASE("weighted corridor versus a longer free detour") {
    // Row 5 is the direct corridor; rows 0..4 weighted, a free ring around.
    WeightMap w(square(12));
    for (int x = 1; x < 11; ++x) w.cost[w.geom.index(x, 5)] = 3.0;
    const GridPath heavy = plan_path_cells(w, {0, 5}, {11, 5});
    CHECK(heavy.cost == doctest::Approx(oracle::dijkstra(w, 0, 5, 11, 5)));
    bool avoided = true;
    for (const Cell& c : heavy.cells) avoided &= !(c.y == 5 && c.x > 0 && c.x < 11);
    CHECK(avoided);

    for (int x = 1; x < 11; ++x) w.cost[w.geom.index(x, 5)] = 0.01;
    const GridPath light = plan_path_cells(w, {0, 5}, {11, 5});
    CHECK(light.cells.size() == 12);
    CHECK(light.cost == doctest::Approx(11.0 + 10 * 0.01));
}

TEST_CASE("per-cell mode adds weights independent of move length") {
    WeightMap w(square(5));
    w.mode = WeightMode::PerCell;
    for (auto& c : w.cost) c = 0.5;
    const GridPath p = plan_path_cells(w, {0, 0}, {4, 4});
    CHECK(p.cost == doctest::Approx(4 * std::sqrt(2.0) + 4 * 0.5));
    w.mode = WeightMode::ScaledByMoveLength;
    CHECK(plan_path_cells(w, {0, 0}, {4, 4}).cost == doctest::Approx(4 * std::sqrt(2.0) * 1.5));
}

TEST_CASE("blocked endpoints and enclosed goals raise NoPathError") {
    WeightMap w(square(9));
    w.blocked[w.geom.index(8, 8)] = 1;
    CHECK_THROWS_AS(plan_path_cells(w, {0, 0}, {8, 8}), NoPathError);
    CHECK_THROWS_AS(plan_path_cells(w, {8, 8}, {0, 0}), NoPathError);
    CHECK_THROWS_AS(plan_path_cells(w, {0, 0}, {9, 0}), NoPathError);
    for (int x = 3; x <= 5; ++x)
        for (int y = 3; y <= 5; ++y)
            if (x != 4 || y != 4) w.blocked[w.geom.index(x, y)] = 1;
    CHECK_THROWS_AS(plan_path_cells(w, {0, 0}, {4, 4}), NoPathError);
    CHECK_FALSE(path_exists(w, {0, 0}, {4, 4}));
    CHECK(path_exists(w, {0, 0}, {7, 0}));
}

TEST_CASE("A* cost equals Dijkstra on random weighted grids") {
    Rng rng(77);
    for (int k = 0; k < 100; ++k) {
        const WeightMode mode = k % 2 ? WeightMode::PerCell : WeightMode::ScaledByMoveLength;
        WeightMap w = random_map(rng, 32, mode);
        const Cell s{int(rng.uniform(0, 32)), int(rng.uniform(0, 32))};
        const Cell g{int(rng.uniform(0, 32)), int(rng.uniform(0, 32))};
        w.blocked[w.geom.index(s.x, s.y)] = 0;
        w.blocked[w.geom.index(g.x, g.y)] = 0;
        const double ref = oracle::dijkstra(w, s.x, s.y, g.x, g.y);
        if (std::isinf(ref)) {
            CHECK_THROWS_AS(plan_path_cells(w, s, g), NoPathError);
            CHECK_FALSE(path_exists(w, s, g));
            continue;
        }
        const GridPath p = plan_path_cells(w, s, g);
        check_path_shape(w, p, s, g);
        CHECK(p.cost == doctest::Approx(ref).epsilon(1e-9));
        CHECK(oracle::path_cost(w, p.cells) == doctest::Approx(p.cost).epsilon(1e-9));
    }
}

TEST_CASE("planner is deterministic") {
    Rng rng(5);
    const WeightMap w = random_map(rng, 32, WeightMode::ScaledByMoveLength);
    WeightMap open = w;
    open.blocked.assign(open.blocked.size(), 0);
    const GridPath a = plan_path_cells(open, {0, 0}, {31, 31});
    const GridPath b = plan_path_cells(open, {0, 0}, {31, 31});
    CHECK(a.cells == b.cells);
}

TEST_CASE("world-coordinate planning returns cell centers") {
    GridGeometry g = square(20, 0.1);
    g.origin = Pose2(1.0, 2.0, 0.0);
    const WeightMap w(g);
    const auto pts = plan_path(w, {1.05, 2.05}, {2.93, 2.07});
    REQUIRE(pts.size() == 20);
    CHECK(pts.front().x() == doctest::Approx(1.05));
    CHECK(pts.back().x() == doctest::Approx(2.95));
    CHECK_THROWS_AS(plan_path(w, {0.0, 0.0}, {2.0, 2.5}), NoPathError);
}
