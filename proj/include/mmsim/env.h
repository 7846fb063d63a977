#pragma once

#include "mmsim/ee_motion.h"
#include "mmsim/gridmap.h"
#include "mmsim/robot.h"
#include "mmsim/worldgen.h"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmsim {

enum class BudgetMode { Consecutive, Cumulative };

struct EnvConfig {
    double dt = 0.1;
    double lambda_ik = 50.0;
    double c_rot = 2.0;
    double lambda_vel = 0.1;
    double lambda_acc = 0.05;
    double r_coll = -10.0;
    double v_ee_max = 0.2;

    double success_position = 0.025;
    double success_rotation = 0.05;
    double deviation_position = 0.10;
    double deviation_rotation = 0.05;
    int violation_budget = 20;
    BudgetMode budget_mode = BudgetMode::Consecutive;
    int max_steps = 3000;
    int frame_skip = 1;

    /// Replan every step even without dynamic obstacles.
    bool replan_every_step = false;
    /// Discount of the external learner; only recorded in logs.
    double gamma = 0.99;

    MotionConfig motion;

    /// Throws ConfigError.
    void validate() const;
};

EnvConfig env_config_from_json(const json& j);
json env_config_to_json(const EnvConfig& c);
EnvConfig load_env_config(const std::filesystem::path& path);

/// Base linear / angular and torso components are normalized to [-1, 1];
/// a_ee is in m/s within [0, v_ee_max].
struct Action {
    double vx = 0.0;
    double vy = 0.0;
    double omega = 0.0;
    double torso = 0.0;
    double a_ee = 0.0;
};

/// Flat action layout for a robot: [vx, (vy), omega, (torso), a_ee].
std::vector<std::string> action_names(const RobotModel& robot);
std::vector<double> flatten_action(const Action& a, const RobotModel& robot);
/// Throws ContractError on a length mismatch.
Action unflatten_action(const std::vector<double>& v, const RobotModel& robot);
Action clamp_action(const Action& a, double v_ee_max);

struct Observation {
    LocalMap coarse;
    LocalMap fine;
    std::vector<double> joints;
    Vec3 v_ee = Vec3::Zero();  ///< base frame
    Pose3 desired;             ///< base frame
    Pose3 goal;                ///< intermediate goal, base frame
    std::vector<double> prev_action;

    std::vector<double> flatten() const;
};

struct LayoutSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

/// Slices of the flat observation in order: coarse, fine, joints, v_ee,
/// desired (xyz + wxyz), goal (xyz + wxyz), prev_action.
struct ObservationLayout {
    std::vector<LayoutSlice> slices;
    std::size_t size = 0;

    const LayoutSlice& at(const std::string& name) const;
};

ObservationLayout observation_layout(const RobotModel& robot);

/// Reward terms of one control step. With frame skip the terms are summed
/// over the sub-steps and `collisions` counts colliding sub-steps.
struct RewardBreakdown {
    double r_ik = 0.0;
    double r_vel = 0.0;
    double r_acc = 0.0;
    double n_vel = 0.0;
    double collisions = 0.0;
    double r_coll = 0.0;  ///< r_coll * collisions
};

double combine_reward(const RewardBreakdown& b, const EnvConfig& cfg);

struct RewardInputs {
    Pose3 achieved;
    Pose3 desired;
    std::vector<double> action;
    std::vector<double> prev_action;
    double a_ee = 0.0;
    bool collision = false;
};

/// Single-step terms: r_ik = -|dp|^2 - c_rot d_rot, r_vel = -(v_max - a_ee)^2,
/// r_acc = -|a - a_prev|^2, n_vel = a_ee / v_max.
RewardBreakdown reward_terms(const RewardInputs& in, const EnvConfig& cfg);

enum class Termination { None, Success, Deviation, CollisionBudget, MaxSteps };
std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct ViolationState {
    int counter = 0;
    int total_collisions = 0;
    int total_violations = 0;
};

struct StepCheck {
    bool at_goal = false;
    bool deviated = false;
    bool collided = false;
};

/// Updates the counters with this step's flags and decides termination.
/// Returns the cause and sets `bootstrap` (true on success and max steps).
Termination classify_termination(ViolationState& st, const StepCheck& check, int step_index, const EnvConfig& cfg,
                                 bool& bootstrap);

struct StepResult {
    Observation observation;
    double reward = 0.0;
    RewardBreakdown breakdown;
    bool terminated = false;
    Termination cause = Termination::None;
    bool bootstrap = false;

    Pose2 base;
    Pose3 ee_desired;
    Pose3 ee_achieved;
    bool ik_ok = false;
    bool replanned = false;
    bool plan_blocked = false;
};

class Env {
public:
    Env(RobotModel robot, EnvConfig cfg);

    /// Throws EpisodeInfeasibleError if no motion can be generated.
    Observation reset(const EpisodeSpec& spec, MotionKind kind);

    /// Throws ContractError before reset or after termination.
    StepResult step(const Action& action);
    StepResult step(const std::vector<double>& flat_action);

    const RobotModel& robot() const { return robot_; }
    const EnvConfig& config() const { return cfg_; }
    const EEMotionPlan& plan() const;
    const Pose2& base() const { return base_; }
    const JointState& joints() const { return joints_; }
    const Pose3& ee_desired() const { return desired_; }
    const Pose3& ee_achieved() const { return achieved_; }
    const Pose3& goal() const { return goal_; }
    const std::vector<DynamicObstacle>& dynamics() const { return dynamics_; }
    const OccupancyGrid& static_world() const { return world_; }
    int steps() const { return steps_; }
    bool terminated() const { return terminated_; }
    Observation observe() const;

private:
    void substep(const Action& a, const std::vector<double>& flat, StepResult& out, bool first);

    RobotModel robot_;
    EnvConfig cfg_;
    OccupancyGrid world_;
    Bounds bounds_;
    std::vector<DynamicObstacle> dynamics_;
    std::optional<MotionGenerator> motion_;
    Pose2 base_;
    JointState joints_;
    Pose3 desired_;
    Pose3 achieved_;
    Pose3 goal_;
    double arc_ = 0.0;
    std::vector<double> prev_action_;
    ViolationState violations_;
    int steps_ = 0;
    bool active_ = false;
    bool terminated_ = false;
};

using Policy = std::function<Action(const Observation&)>;

struct StepRecord {
    int step = 0;
    std::vector<double> action;
    double reward = 0.0;
    RewardBreakdown breakdown;
    Pose3 ee_desired;
    Pose3 ee_achieved;
    Pose2 base;
    Termination termination = Termination::None;
    bool bootstrap = false;
};

struct EpisodeLog {
    std::string robot;
    std::string motion;
    EnvConfig config;
    EpisodeSpec episode;
    std::vector<StepRecord> steps;
    Termination termination = Termination::None;
    bool bootstrap = false;
    double episode_return = 0.0;
    std::string error;  ///< set when the episode aborted with an error

    bool success() const { return termination == Termination::Success; }
};

/// `step_seconds`, when given, receives the wall time spent inside env.step.
EpisodeLog run_episode(const EpisodeSpec& spec, const RobotModel& robot, const EnvConfig& cfg, MotionKind kind,
                       const Policy& policy, double* step_seconds = nullptr);

/// JSON lines: a header record (config, robot, motion, episode), one record
/// per step, and an end record with the return and termination.
std::string serialize_log(const EpisodeLog& log);
/// Throws ParseError naming the offending line.
EpisodeLog parse_log(const std::string& text);
EpisodeLog read_log(const std::filesystem::path& path);

/// Replays the actions of a recorded log in order (zero actions afterwards).
Policy replay_policy(const EpisodeLog& log, const RobotModel& robot);

}  // namespace mmsim
