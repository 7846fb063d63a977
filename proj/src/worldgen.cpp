#include "mmsim/worldgen.h"

#include "mmsim/astar.h"
#include "mmsim/errors.h"
#include "mmsim/rng.h"

#include <cmath>
#include <numbers>

namespace mmsim {

namespace {

constexpr double kPi = std::numbers::pi;

void check_range(const Range& r, const char* name) {
    if (!(r.min < r.max)) throw ConfigError(std::string("worldgen: range '") + name + "' needs min < max");
}

Range range_field(const json& j, const char* key, Range fallback) {
    if (!j.contains(key)) return fallback;
    const json& r = j.at(key);
    return {r.at(0).get<double>(), r.at(1).get<double>()};
}

json range_json(const Range& r) { return json::array({r.min, r.max}); }

double sample_joint(Rng& rng, const Joint& jt) {
    return jt.bounded() ? rng.uniform(jt.lower, jt.upper) : rng.uniform(-kPi, kPi);
}

Shape random_shape(Rng& rng, const Vec2& center, const Range& w, const Range& b, double height) {
    Shape s;
    s.type = rng.bernoulli(0.5) ? ShapeType::Rectangle : ShapeType::Ellipse;
    s.center = center;
    s.rotation = rng.uniform(-kPi, kPi);
    s.size = {rng.uniform(w.min, w.max), rng.uniform(b.min, b.max)};
    s.height = height;
    return s;
}

}  // namespace

void WorldGenConfig::validate() const {
    if (!(bounds.max_x > bounds.min_x) || !(bounds.max_y > bounds.min_y)) throw ConfigError("worldgen: empty bounds");
    if (!(resolution > 0.0)) throw ConfigError("worldgen: resolution must be positive");
    if (!(grid_pitch > 0.0)) throw ConfigError("worldgen: grid_pitch must be positive");
    if (offset_std < 0.0) throw ConfigError("worldgen: offset_std must be non-negative");
    if (keep_probability < 0.0 || keep_probability > 1.0) throw ConfigError("worldgen: keep_probability not in [0,1]");
    check_range(width, "width");
    check_range(breadth, "breadth");
    check_range(height, "height");
    check_range(goal_distance, "goal_distance");
    if (goal_height) check_range(*goal_height, "goal_height");
    check_range(dynamic_speed, "dynamic_speed");
    check_range(dynamic_size, "dynamic_size");
    if (!(rejection_inflation > 0.0)) throw ConfigError("worldgen: rejection_inflation must be positive");
    if (max_attempts <= 0 || max_world_attempts <= 0) throw ConfigError("worldgen: attempt budgets must be positive");
    if (num_dynamic < 0) throw ConfigError("worldgen: num_dynamic must be non-negative");
}

WorldGenConfig worldgen_from_json(const json& j) {
    WorldGenConfig c;
    try {
        if (j.contains("bounds")) {
            const json& b = j.at("bounds");
            c.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
        }
        c.resolution = j.value("resolution", c.resolution);
        c.grid_pitch = j.value("grid_pitch", c.grid_pitch);
        c.offset_std = j.value("offset_std", c.offset_std);
        c.keep_probability = j.value("keep_probability", c.keep_probability);
        c.width = range_field(j, "width", c.width);
        c.breadth = range_field(j, "breadth", c.breadth);
        c.height = range_field(j, "height", c.height);
        c.goal_distance = range_field(j, "goal_distance", c.goal_distance);
        c.rejection_inflation = j.value("rejection_inflation", c.rejection_inflation);
        if (j.contains("goal_height") && !j.at("goal_height").is_null()) c.goal_height = range_field(j, "goal_height", {});
        c.restrict_goal_height = j.value("restrict_goal_height", c.restrict_goal_height);
        c.max_attempts = j.value("max_attempts", c.max_attempts);
        c.max_world_attempts = j.value("max_world_attempts", c.max_world_attempts);
        c.num_dynamic = j.value("num_dynamic", c.num_dynamic);
        c.dynamic_speed = range_field(j, "dynamic_speed", c.dynamic_speed);
        c.dynamic_size = range_field(j, "dynamic_size", c.dynamic_size);
        c.dynamic_height = j.value("dynamic_height", c.dynamic_height);
        c.dynamic_clearance = j.value("dynamic_clearance", c.dynamic_clearance);
        const std::string task = j.value("task", std::string("random_goal"));
        if (task == "random_goal") {
            c.task = TaskMode::RandomGoal;
        } else if (task == "straight_line") {
            c.task = TaskMode::StraightLine;
        } else {
            throw ConfigError("worldgen: unknown task '" + task + "'");
        }
        c.straight_distance = j.value("straight_distance", c.straight_distance);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("worldgen config: ") + e.what());
    }
    c.validate();
    return c;
}

json worldgen_to_json(const WorldGenConfig& c) {
    json j{{"bounds", json::array({c.bounds.min_x, c.bounds.min_y, c.bounds.max_x, c.bounds.max_y})},
           {"resolution", c.resolution},
           {"grid_pitch", c.grid_pitch},
           {"offset_std", c.offset_std},
           {"keep_probability", c.keep_probability},
           {"width", range_json(c.width)},
           {"breadth", range_json(c.breadth)},
           {"height", range_json(c.height)},
           {"goal_distance", range_json(c.goal_distance)},
           {"rejection_inflation", c.rejection_inflation},
           {"restrict_goal_height", c.restrict_goal_height},
           {"max_attempts", c.max_attempts},
           {"max_world_attempts", c.max_world_attempts},
           {"num_dynamic", c.num_dynamic},
           {"dynamic_speed", range_json(c.dynamic_speed)},
           {"dynamic_size", range_json(c.dynamic_size)},
           {"dynamic_height", c.dynamic_height},
           {"dynamic_clearance", c.dynamic_clearance},
           {"task", c.task == TaskMode::RandomGoal ? "random_goal" : "straight_line"},
           {"straight_distance", c.straight_distance}};
    j["goal_height"] = c.goal_height ? range_json(*c.goal_height) : json(nullptr);
    return j;
}

WorldGenConfig load_worldgen(const std::filesystem::path& path) {
    try {
        return worldgen_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.find(path.string()) != std::string::npos) throw;
        throw ConfigError("'" + path.string() + "': " + msg);
    }
}

json episode_to_json(const EpisodeSpec& e) {
    json header{{"seed", e.seed},
                {"robot", e.robot},
                {"start", to_json(e.start)},
                {"joints", std::vector<double>(e.joints.data(), e.joints.data() + e.joints.size())},
                {"goal", to_json(e.goal)}};
    return json{{"header", header}, {"world", world_to_json(e.world)}};
}

EpisodeSpec episode_from_json(const json& j) {
    EpisodeSpec e;
    try {
        const json& h = j.at("header");
        e.seed = h.at("seed").get<std::uint64_t>();
        e.robot = h.value("robot", std::string());
        e.start = pose2_from_json(h.at("start"));
        const auto q = h.at("joints").get<std::vector<double>>();
        e.joints = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
        e.goal = pose3_from_json(h.at("goal"));
        e.world = world_from_json(j.at("world"));
    } catch (const json::exception& ex) {
        throw ParseError(std::string("episode: ") + ex.what());
    }
    return e;
}

std::string serialize_episode(const EpisodeSpec& e) { return dump_pretty(episode_to_json(e)); }

WorldDescription generate_world(const WorldGenConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    WorldDescription w;
    w.bounds = cfg.bounds;
    w.resolution = cfg.resolution;
    Rng rng(seed);
    const int nx = static_cast<int>(std::floor(cfg.bounds.size_x() / cfg.grid_pitch + 1e-9));
    const int ny = static_cast<int>(std::floor(cfg.bounds.size_y() / cfg.grid_pitch + 1e-9));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            if (!rng.bernoulli(cfg.keep_probability)) continue;
            Vec2 c(cfg.bounds.min_x + (ix + 0.5) * cfg.grid_pitch, cfg.bounds.min_y + (iy + 0.5) * cfg.grid_pitch);
            c.x() += rng.normal(0.0, cfg.offset_std);
            c.y() += rng.normal(0.0, cfg.offset_std);
            c.x() = std::clamp(c.x(), cfg.bounds.min_x, cfg.bounds.max_x);
            c.y() = std::clamp(c.y(), cfg.bounds.min_y, cfg.bounds.max_y);
            Shape s = random_shape(rng, c, cfg.width, cfg.breadth, 0.0);
            s.height = rng.uniform(cfg.height.min, cfg.height.max);
            w.shapes.push_back(s);
        }
    }
    return w;
}

Range goal_height_range(const WorldGenConfig& cfg, const RobotModel& robot) {
    if (cfg.goal_height) return *cfg.goal_height;
    return cfg.restrict_goal_height ? robot.constraints.restricted_height : robot.constraints.goal_height;
}

namespace {

void spawn_dynamics(const WorldGenConfig& cfg, Rng& rng, EpisodeSpec& e) {
    for (int k = 0; k < cfg.num_dynamic; ++k) {
        Vec2 p;
        for (int tries = 0; tries < 100; ++tries) {
            p = {rng.uniform(cfg.bounds.min_x, cfg.bounds.max_x), rng.uniform(cfg.bounds.min_y, cfg.bounds.max_y)};
            if ((p - e.start.position()).norm() > cfg.dynamic_clearance &&
                (p - e.goal.position.head<2>()).norm() > cfg.dynamic_clearance)
                break;
        }
        DynamicObstacle d;
        d.shape = random_shape(rng, p, cfg.dynamic_size, cfg.dynamic_size, cfg.dynamic_height);
        const double speed = rng.uniform(cfg.dynamic_speed.min, cfg.dynamic_speed.max);
        const double heading = rng.uniform(-kPi, kPi);
        d.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
        e.world.dynamics.push_back(d);
    }
}

}  // namespace

EpisodeSpec sample_episode(const WorldGenConfig& cfg, const WorldDescription& world, const RobotModel& robot,
                           std::uint64_t seed) {
    cfg.validate();
    const OccupancyGrid grid = world.rasterize();
    // one distance transform serves both inflation radii
    const std::vector<double> d2 = squared_distance_cells(threshold(grid, 0.0));
    auto within = [&](double radius) {
        BinaryGrid out(grid.geom);
        const double limit = (radius + 1e-9) / grid.geom.resolution;
        for (std::size_t i = 0; i < d2.size(); ++i) out.cells[i] = d2[i] <= limit * limit ? 1 : 0;
        return out;
    };
    const BinaryGrid rejection = within(cfg.rejection_inflation);
    const BinaryGrid footprint = within(robot.footprint_radius);
    const WeightMap weights = WeightMap::uniform(rejection);
    const Range z_range = goal_height_range(cfg, robot);
    const GridGeometry& g = grid.geom;
    const double margin = robot.footprint_radius;

    Rng rng(mix_seed(seed, 1));
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        EpisodeSpec e;
        e.seed = seed;
        e.robot = robot.name;
        e.world = world;
        e.start = Pose2(rng.uniform(cfg.bounds.min_x + margin, cfg.bounds.max_x - margin),
                        rng.uniform(cfg.bounds.min_y + margin, cfg.bounds.max_y - margin), rng.uniform(-kPi, kPi));
        e.joints.resize(robot.dof());
        for (int i = 0; i < robot.dof(); ++i) e.joints[i] = sample_joint(rng, robot.joints[i]);
        const double dist = rng.uniform(cfg.goal_distance.min, cfg.goal_distance.max);
        const double heading = rng.uniform(-kPi, kPi);
        const Vec2 goal_xy = e.start.position() + dist * Vec2(std::cos(heading), std::sin(heading));
        e.goal = Pose3(Vec3(goal_xy.x(), goal_xy.y(), rng.uniform(z_range.min, z_range.max)), rng.unit_quaternion());

        const auto start_cell = g.world_to_cell(e.start.position());
        const auto goal_cell = g.world_to_cell(goal_xy);
        if (!start_cell || !goal_cell) continue;
        if (footprint.at(*start_cell) || check_base_collision(robot, e.start, grid)) continue;
        // the EE may not start inside an obstacle's clearance zone either
        const Pose3 ee = forward_kinematics(robot, e.start, e.joints);
        const auto ee_cell = g.world_to_cell(ee.position.head<2>());
        if (!ee_cell || rejection.at(*ee_cell)) continue;
        if (!path_exists(weights, *start_cell, *goal_cell)) continue;

        spawn_dynamics(cfg, rng, e);
        return e;
    }
    throw UnsolvableWorldError("sample_episode: no solvable start/goal after " + std::to_string(cfg.max_attempts) +
                               " attempts (seed " + std::to_string(seed) + ")");
}

EpisodeSpec straight_line_episode(const WorldGenConfig& cfg, const RobotModel& robot, std::uint64_t seed) {
    cfg.validate();
    Rng rng(mix_seed(seed, 2));
    EpisodeSpec e;
    e.seed = seed;
    e.robot = robot.name;
    e.world.bounds = cfg.bounds;
    e.world.resolution = cfg.resolution;
    const double cx = 0.5 * (cfg.bounds.min_x + cfg.bounds.max_x), cy = 0.5 * (cfg.bounds.min_y + cfg.bounds.max_y);
    const double heading = rng.uniform(-kPi, kPi);
    // start behind the center so the whole motion stays inside the map
    const double back = 0.5 * cfg.straight_distance;
    e.start = Pose2(cx - back * std::cos(heading) + rng.uniform(-0.5, 0.5),
                    cy - back * std::sin(heading) + rng.uniform(-0.5, 0.5), heading);
    e.joints = robot.home_joints;
    const Pose3 ee = forward_kinematics(robot, e.start, e.joints);
    e.goal = ee;
    e.goal.position += cfg.straight_distance * Vec3(std::cos(heading), std::sin(heading), 0.0);
    spawn_dynamics(cfg, rng, e);
    return e;
}

EpisodeSpec generate_episode(const WorldGenConfig& cfg, const RobotModel& robot, std::uint64_t seed) {
    if (cfg.task == TaskMode::StraightLine) return straight_line_episode(cfg, robot, seed);
    for (int k = 0; k < cfg.max_world_attempts; ++k) {
        const WorldDescription world = generate_world(cfg, mix_seed(seed, 100 + k));
        try {
            EpisodeSpec e = sample_episode(cfg, world, robot, mix_seed(seed, 200 + k));
            e.seed = seed;
            return e;
        } catch (const UnsolvableWorldError&) {
        }
    }
    throw UnsolvableWorldError("generate_episode: no solvable world for seed " + std::to_string(seed));
}

bool episode_solvable(const EpisodeSpec& e, double inflation) {
    const OccupancyGrid grid = e.world.rasterize();
    const BinaryGrid occ = inflate(grid, inflation, 0.0);
    const auto s = grid.geom.world_to_cell(e.start.position());
    const auto t = grid.geom.world_to_cell(e.goal.position.head<2>());
    if (!s || !t) return false;
    return path_exists(WeightMap::uniform(occ), *s, *t);
}

}  // namespace mmsim
