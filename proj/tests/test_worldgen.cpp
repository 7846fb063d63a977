#include <doctest.h>

#include "fixtures.h"
#include "mmsim/errors.h"
#include "mmsim/rng.h"
#include "mmsim/worldgen.h"
#include "oracles.h"

#include <cmath>
#include <random>

using namespace mmsim;

TEST_CASE("world generation is deterministic in the seed") {
    const WorldGenConfig cfg;
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL}) {
        const WorldDescription a = generate_world(cfg, seed), b = generate_world(cfg, seed);
        CHECK(world_to_json(a).dump() == world_to_json(b).dump());
    }
    CHECK(world_to_json(generate_world(cfg, 1)).dump() != world_to_json(generate_world(cfg, 2)).dump());
}

TEST_CASE("zero keep probability gives an empty world") {
    WorldGenConfig cfg;
    cfg.keep_probability = 0.0;
    const WorldDescription w = generate_world(cfg, 3);
    CHECK(w.shapes.empty());
    CHECK(w.rasterize().max_height() == 0.0);
}

TEST_CASE("obstacle count matches a replay of the keep draws") {
    // Each site draws the keep flag first; a kept site then consumes two
    // normals (two draws each), type, rotation, two extents and the height.
    const WorldGenConfig cfg;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 eng(seed);
        auto u = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
        int expected = 0;
        for (int site = 0; site < 100; ++site) {
            if (!(u() < cfg.keep_probability)) continue;
            ++expected;
            for (int k = 0; k < 9; ++k) u();
        }
        CHECK(generate_world(cfg, seed).shapes.size() == std::size_t(expected));
    }
}

TEST_CASE("generated shapes respect the configured ranges") {
    const WorldGenConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (const Shape& s : generate_world(cfg, seed).shapes) {
            CHECK(cfg.width.contains(s.size.x()));
            CHECK(cfg.breadth.contains(s.size.y()));
            CHECK(cfg.height.contains(s.height));
            CHECK(cfg.bounds.contains(s.center));
        }
    }
}

TEST_CASE("sampled episodes are solvable and within the configured ranges") {
    const WorldGenConfig cfg;
    const RobotModel robot = load_test_robot("pr2");
    const Range z = goal_height_range(cfg, robot);
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        const EpisodeSpec e = generate_episode(cfg, robot, seed);
        const OccupancyGrid grid = e.world.rasterize();
        // inflation itself is checked against brute force in the gridmap tests
        const BinaryGrid occ = inflate(grid, 0.4, 0.0);
        const auto s = grid.geom.world_to_cell(e.start.position());
        const auto g = grid.geom.world_to_cell(e.goal.position.head<2>());
        REQUIRE(s.has_value());
        REQUIRE(g.has_value());
        CHECK(oracle::reachable(occ, s->x, s->y, g->x, g->y));
        const double d = (e.goal.position.head<2>() - e.start.position()).norm();
        CHECK(d >= 0.5 - 1e-12);
        CHECK(d <= 5.0 + 1e-12);
        CHECK(z.contains(e.goal.position.z()));
        CHECK(std::abs(e.goal.orientation.norm() - 1.0) < 1e-12);
        CHECK(robot.within_limits(e.joints));
        CHECK_FALSE(check_base_collision(robot, e.start, grid));
        CHECK(e.seed == seed);
    }
}

TEST_CASE("episode bytes are identical for the same seed") {
    WorldGenConfig cfg;
    cfg.num_dynamic = 2;
    const RobotModel robot = load_test_robot("tiago");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::string a = serialize_episode(generate_episode(cfg, robot, seed));
        CHECK(a == serialize_episode(generate_episode(cfg, robot, seed)));
        const EpisodeSpec back = episode_from_json(json::parse(a));
        CHECK(serialize_episode(back) == a);
    }
}

TEST_CASE("a fully blocked world is reported unsolvable") {
    WorldGenConfig cfg;
    cfg.max_attempts = 20;
    WorldDescription w;
    w.bounds = cfg.bounds;
    w.resolution = cfg.resolution;
    w.shapes = {Shape{ShapeType::Rectangle, {5.0, 5.0}, {10.0, 10.0}, 0.0, 1.0}};
    CHECK_THROWS_AS(sample_episode(cfg, w, load_test_robot("pr2"), 1), UnsolvableWorldError);
}

TEST_CASE("a sealed wall separates start and goal sides") {
    WorldGenConfig cfg;
    WorldDescription w;
    w.bounds = cfg.bounds;
    w.resolution = cfg.resolution;
    w.shapes = {Shape{ShapeType::Rectangle, {5.0, 5.0}, {0.2, 10.0}, 0.0, 1.0}};
    const RobotModel robot = load_test_robot("hsr");
    int accepted = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        try {
            const EpisodeSpec e = sample_episode(cfg, w, robot, seed);
            CHECK((e.start.x < 5.0) == (e.goal.position.x() < 5.0));
            ++accepted;
        } catch (const UnsolvableWorldError&) {
        }
    }
    CHECK(accepted > 50);
}

TEST_CASE("dynamic obstacles keep clear of start and goal") {
    WorldGenConfig cfg;
    cfg.num_dynamic = 3;
    const RobotModel robot = load_test_robot("pr2");
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const EpisodeSpec e = generate_episode(cfg, robot, seed);
        REQUIRE(e.world.dynamics.size() == 3);
        for (const DynamicObstacle& d : e.world.dynamics) {
            CHECK((d.shape.center - e.start.position()).norm() > cfg.dynamic_clearance);
            CHECK(d.velocity.norm() >= cfg.dynamic_speed.min - 1e-12);
            CHECK(d.velocity.norm() <= cfg.dynamic_speed.max + 1e-12);
            CHECK(d.shape.height == cfg.dynamic_height);
        }
    }
}

TEST_CASE("straight-line episodes place the goal ahead of the home pose") {
    WorldGenConfig cfg;
    cfg.task = TaskMode::StraightLine;
    for (const char* name : {"pr2", "hsr", "tiago"}) {
        const RobotModel robot = load_test_robot(name);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const EpisodeSpec e = generate_episode(cfg, robot, seed);
            CHECK(e.world.shapes.empty());
            CHECK(e.joints == robot.home_joints);
            const Pose3 ee = forward_kinematics(robot, e.start, e.joints);
            const Vec3 d = e.goal.position - ee.position;
            CHECK(d.norm() == doctest::Approx(2.0));
            CHECK(d.x() == doctest::Approx(2.0 * std::cos(e.start.theta)));
            CHECK(d.y() == doctest::Approx(2.0 * std::sin(e.start.theta)));
            CHECK(d_rot(e.goal.orientation, ee.orientation) < 1e-12);
            CHECK(cfg.bounds.contains(e.goal.position.head<2>()));
        }
    }
}

TEST_CASE("worldgen config validation") {
    WorldGenConfig cfg;
    cfg.keep_probability = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(worldgen_from_json(json::parse(R"({"resolution": -1})")), ConfigError);
    CHECK_THROWS_AS(load_worldgen("/nonexistent/worldgen.json"), ConfigError);
    const WorldGenConfig d;
    CHECK(worldgen_to_json(worldgen_from_json(worldgen_to_json(d))).dump() == worldgen_to_json(d).dump());
}
