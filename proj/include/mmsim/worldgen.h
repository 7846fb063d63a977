#pragma once

#include "mmsim/gridmap.h"
#include "mmsim/robot.h"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace mmsim {

enum class TaskMode {
    RandomGoal,    ///< procedurally generated obstacles, random start/goal
    StraightLine,  ///< empty world, goal straight ahead of the home EE pose
};

struct WorldGenConfig {
    Bounds bounds{0.0, 0.0, 10.0, 10.0};
    double resolution = 0.025;

    // obstacle placement
    double grid_pitch = 1.0;
    double offset_std = 0.3;
    double keep_probability = 0.6;
    Range width{0.2, 1.0};
    Range breadth{0.2, 1.0};
    Range height{0.2, 1.8};

    // start / goal sampling
    Range goal_distance{0.5, 5.0};
    double rejection_inflation = 0.4;
    std::optional<Range> goal_height;  ///< overrides the robot's band
    bool restrict_goal_height = false;  ///< use the robot's restricted band
    int max_attempts = 100;
    int max_world_attempts = 20;

    // dynamic obstacles
    int num_dynamic = 0;
    Range dynamic_speed{0.1, 0.15};
    Range dynamic_size{0.3, 0.6};
    double dynamic_height = 2.0;
    double dynamic_clearance = 1.0;

    TaskMode task = TaskMode::RandomGoal;
    double straight_distance = 2.0;

    /// Throws ConfigError on an invalid range or radius.
    void validate() const;
};

WorldGenConfig worldgen_from_json(const json& j);
json worldgen_to_json(const WorldGenConfig& c);
WorldGenConfig load_worldgen(const std::filesystem::path& path);

struct EpisodeSpec {
    WorldDescription world;
    Pose2 start;
    JointState joints;
    Pose3 goal;
    std::uint64_t seed = 0;
    std::string robot;
};

json episode_to_json(const EpisodeSpec& e);
EpisodeSpec episode_from_json(const json& j);
std::string serialize_episode(const EpisodeSpec& e);

/// Obstacles on a regular grid of sites; each site independently keeps a
/// rectangle or ellipse with a normal positional offset, uniform rotation
/// and uniform extents/height. Deterministic in `seed`.
WorldDescription generate_world(const WorldGenConfig& cfg, std::uint64_t seed);

Range goal_height_range(const WorldGenConfig& cfg, const RobotModel& robot);

/// Rejection sampling of start pose, joints and EE goal until the goal is
/// reachable from the start on the world inflated by the rejection radius.
/// Throws UnsolvableWorldError when the attempt budget runs out.
EpisodeSpec sample_episode(const WorldGenConfig& cfg, const WorldDescription& world, const RobotModel& robot,
                           std::uint64_t seed);

/// Empty world; the goal is the home EE pose moved straight ahead along the
/// base heading by cfg.straight_distance.
EpisodeSpec straight_line_episode(const WorldGenConfig& cfg, const RobotModel& robot, std::uint64_t seed);

/// Full pipeline for one seed: regenerates the world with derived seeds
/// whenever sampling reports an unsolvable world.
EpisodeSpec generate_episode(const WorldGenConfig& cfg, const RobotModel& robot, std::uint64_t seed);

/// Independent re-check used by tests and the CLI: goal reachable from the
/// start on the inflated static world.
bool episode_solvable(const EpisodeSpec& e, double inflation);

}  // namespace mmsim
