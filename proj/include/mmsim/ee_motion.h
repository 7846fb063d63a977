#pragma once

#include "mmsim/astar.h"
#include "mmsim/gridmap.h"
#include "mmsim/robot.h"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmsim {

enum class MotionKind { Slerp, Fwd, Spline };

std::string to_string(MotionKind k);
/// Accepts "slerp", "fwd", "spline"; throws ConfigError otherwise.
MotionKind motion_kind_from_string(const std::string& s);

struct MotionConfig {
    double weight_c = 10.0;
    double d_ee = 0.15;
    std::optional<double> d_base;  ///< defaults to the robot's arm reach
    double height_margin = 0.05;
    double collision_margin = 0.05;
    WeightMode weight_mode = WeightMode::ScaledByMoveLength;

    double lds_gain = 5.0;        ///< 1/s
    double nominal_speed = 0.2;   ///< m/s, converts the gain into a per-sample rate
    double sample_spacing = 0.01;  ///< m

    double fwd_blend = 0.3;   ///< m of arc at the end (and start) of fwd profiles
    double lookahead = 1.5;   ///< intermediate goal distance, m
    double tracking_threshold = 0.25;

    int spline_waypoints = 5;
    Range spline_spacing{1.0, 3.0};

    void validate() const;
};

MotionConfig motion_config_from_json(const json& j);
json motion_config_to_json(const MotionConfig& c);

struct WeightParams {
    double c = 10.0;
    double d_ee = 0.15;
    double d_base = 0.8;
    double max_z = 1.45;
    double collision_margin = 0.05;
    double footprint_radius = 0.3;
    WeightMode mode = WeightMode::ScaledByMoveLength;
};

/// w = c * [inflate(z+, d_ee) + (1 - inflate(base path, d_base))], where z+
/// holds obstacles taller than max_z and the base path is the A* path of the
/// base on the footprint-inflated map. Cells within collision_margin of z+
/// are hard-blocked. Throws BasePathInfeasibleError when no base path
/// exists. `base_path` receives the base path cells when given.
WeightMap build_weights(const OccupancyGrid& world, const Pose2& base_start, const Pose3& goal, const WeightParams& p,
                        GridPath* base_path = nullptr);

/// Dense pose sequence with cumulative 3D arc length.
struct EEMotionPlan {
    std::vector<Pose3> poses;
    std::vector<double> arc;
    MotionKind kind = MotionKind::Slerp;
    Pose3 goal;

    double length() const { return arc.empty() ? 0.0 : arc.back(); }
    /// Position interpolated linearly, orientation slerped between samples;
    /// s is clamped to [0, length].
    Pose3 pose_at(double s) const;
    /// Arc length of the closest point to `p`. With a hint the search is
    /// limited to a window around it (falls back to the whole plan).
    double project(const Vec3& p, std::optional<double> hint = std::nullopt) const;
};

/// Builds arc lengths and inserts interpolated samples until no gap between
/// consecutive positions exceeds `spacing`.
EEMotionPlan make_plan(std::vector<Pose3> poses, MotionKind kind, const Pose3& goal, double spacing);

/// Greedy shortcutting of a waypoint polyline; a shortcut replaces a
/// sub-path only if it touches no blocked cell and no cell heavier than the
/// heaviest cell of that sub-path.
std::vector<Vec2> shortcut_path(const WeightMap& weights, const std::vector<Vec2>& waypoints);

/// First-order attractor x += alpha (r(s) - x) tracking a reference that
/// advances `spacing` along the waypoint polyline per sample, resampled at
/// uniform `spacing` arc length. Ends exactly at the last waypoint.
std::vector<Vec2> lds_smooth(const std::vector<Vec2>& waypoints, double alpha, double spacing);

/// Resamples a polyline at uniform arc length; keeps both endpoints.
std::vector<Vec2> resample(const std::vector<Vec2>& pts, double spacing);

/// Smooths 2D waypoints, lifts them to the height profile (linear between
/// knots that clear every obstacle run under the path by height_margin)
/// and slerps the orientation from start to goal by arc fraction.
/// `weights` is used to reject smoothed paths that enter blocked cells.
EEMotionPlan smooth_and_lift(const std::vector<Vec2>& waypoints, const Pose3& start, const Pose3& goal,
                             const OccupancyGrid& world, const WeightMap& weights, const MotionConfig& cfg);

/// Orientation faces the horizontal path tangent; slerps from the start
/// orientation over the first blend window and to the goal over the last.
EEMotionPlan orientation_fwd(const EEMotionPlan& plan, double blend);

/// Natural cubic spline (chord-length parameterized) through random
/// waypoints spaced by a horizontal distance in cfg.spline_spacing, z
/// uniform in `z_range`, random orientations slerped per segment. The first
/// waypoint is `start`. Headings are redrawn to keep waypoints in `bounds`
/// when given.
EEMotionPlan spline_motion(const Pose3& start, int n_waypoints, std::uint64_t seed, const Range& z_range,
                           const MotionConfig& cfg, const std::optional<Bounds>& bounds = std::nullopt,
                           std::vector<Pose3>* waypoints = nullptr);

/// Natural cubic spline through `pts`, parameterized by cumulative chord
/// length `t`.
struct CubicSpline {
    std::vector<double> t;  ///< chord-length knots
    std::vector<Vec3> p;
    std::vector<Vec3> m;    ///< second derivatives
    explicit CubicSpline(const std::vector<Vec3>& pts);
    Vec3 eval(double tt) const;
    Vec3 derivative(double tt) const;
};

/// Full obstacle-aware plan: base path, weights, EE A*, smoothing, lifting
/// and (for Fwd) the forward orientation profile.
EEMotionPlan plan_ee_motion(const OccupancyGrid& world, const RobotModel& robot, const Pose2& base, const Pose3& start,
                            const Pose3& goal, MotionKind kind, const MotionConfig& cfg);

struct MotionQuery {
    Pose3 pose;
    Vec3 velocity = Vec3::Zero();
    double step = 0.0;  ///< requested step length, m
};

struct MotionStep {
    Vec3 velocity = Vec3::Zero();  ///< world frame, m/s
    Pose3 desired;                 ///< plan pose one step further along
    Pose3 intermediate_goal;
    double arc = 0.0;              ///< arc length of `desired`
};

/// Throws OffPlanError when the query pose is further than `tracking` from
/// the plan.
MotionStep next_velocity(const EEMotionPlan& plan, const MotionQuery& q, double dt, double lookahead,
                         double tracking, std::optional<double> hint = std::nullopt);

/// Owns the active plan and the world it was built on. Replanning against
/// an identical world is a no-op unless forced.
class MotionGenerator {
public:
    MotionGenerator(RobotModel robot, MotionConfig cfg, MotionKind kind);

    /// Throws NoPathError (or BasePathInfeasibleError) when no plan exists.
    const EEMotionPlan& start(const OccupancyGrid& world, const Pose2& base, const Pose3& ee, const Pose3& goal,
                              std::uint64_t seed, const Range& z_range);

    /// Returns true when the plan was replaced. On failure the previous
    /// plan is kept and blocked() is set.
    bool replan(const OccupancyGrid& world_now, const Pose2& base_now, const Pose3& ee_now, bool force = false);

    const EEMotionPlan& plan() const { return plan_; }
    bool blocked() const { return blocked_; }
    MotionKind kind() const { return kind_; }
    const MotionConfig& config() const { return cfg_; }

private:
    RobotModel robot_;
    MotionConfig cfg_;
    MotionKind kind_;
    EEMotionPlan plan_;
    std::vector<double> snapshot_;
    Pose3 goal_;
    bool blocked_ = false;
};

/// One JSON object per line: {"arc", "position", "quaternion"}.
std::string plan_to_jsonl(const EEMotionPlan& plan);

}  // namespace mmsim
