#pragma once

#include "mmsim/geometry.h"
#include "mmsim/gridmap.h"
#include "mmsim/json_util.h"

#include <Eigen/Core>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmsim {

enum class DriveType { Omnidirectional, Differential };
enum class JointType { Revolute, Prismatic, Continuous };

struct Range {
    double min = 0.0;
    double max = 0.0;
    bool contains(double v) const { return v >= min && v <= max; }
};

struct Joint {
    std::string name;
    JointType type = JointType::Revolute;
    Pose3 parent;               ///< fixed transform from the previous frame
    Vec3 axis = Vec3::UnitZ();  ///< unit axis in the joint frame
    double lower = 0.0;
    double upper = 0.0;
    double max_velocity = 1.0;  ///< rad/s or m/s

    bool bounded() const { return type != JointType::Continuous; }
    double clamp(double q) const { return bounded() ? std::clamp(q, lower, upper) : q; }
};

/// Velocity and pose constraints of a platform.
struct RobotConstraints {
    double max_linear_velocity = 0.2;
    double max_angular_velocity = 1.0;
    Range goal_height{0.2, 1.5};
    Range restricted_height{0.4, 1.0};
};

using JointState = Eigen::VectorXd;

struct RobotModel {
    std::string name;
    DriveType drive = DriveType::Omnidirectional;
    double footprint_radius = 0.3;
    double base_diagonal = 0.6;
    double arm_reach = 0.8;
    std::vector<Joint> joints;
    std::optional<int> torso_index;
    bool learn_torso = false;
    Pose3 ee_offset;
    JointState home_joints;
    std::optional<Pose3> zero_ee_pose;  ///< documented FK at all-zero joints
    RobotConstraints constraints;

    int dof() const { return static_cast<int>(joints.size()); }
    bool has_learned_torso() const { return learn_torso && torso_index.has_value(); }
    JointState clamp(const JointState& q) const;
    bool within_limits(const JointState& q, double tol = 0.0) const;
};

struct VelocityCommand {
    double vx = 0.0;  ///< forward, m/s
    double vy = 0.0;  ///< lateral, m/s (ignored by differential drives)
    double omega = 0.0;
    std::optional<double> torso;  ///< m/s
};

RobotModel robot_from_json(const json& j);
json robot_to_json(const RobotModel& m);
/// Throws ConfigError naming the path.
RobotModel load_robot(const std::filesystem::path& path);

/// Base frame lifted into SE(3) followed by the joint chain and EE offset.
/// Throws ContractError when the joint dimension does not match.
Pose3 forward_kinematics(const RobotModel& model, const Pose2& base, const JointState& joints);

/// World-frame geometric Jacobian (rows: linear, angular) at `joints`,
/// together with the EE pose.
Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const RobotModel& model, const Pose2& base, const JointState& joints,
                                                   Pose3* ee = nullptr);

/// Applies the platform's linear/angular limits; differential drives lose
/// the lateral component.
VelocityCommand clamp_command(const RobotModel& model, const VelocityCommand& cmd);

/// Euler integration of the clamped command in the base frame.
Pose2 integrate_base(const RobotModel& model, const Pose2& base, const VelocityCommand& cmd, double dt);

struct IkOptions {
    double damping = 1e-3;
    int max_iterations = 100;
    double accept_position = 1e-3;  ///< m
    double accept_rotation = 1e-3;  ///< d_rot
    double converge_tolerance = 1e-10;
};

struct IkResult {
    JointState joints;
    Pose3 achieved;
    bool ok = false;
    double position_error = 0.0;
    double rotation_error = 0.0;  ///< d_rot
    int iterations = 0;
};

/// Damped least squares with a per-joint displacement metric weighted by
/// 1 / max_velocity. Every joint moves at most max_velocity * dt from
/// `joints_now` and stays inside its limits. With `torso_cmd` the torso
/// integrates the command and is excluded from the solve. Never throws for
/// unreachable targets: returns the best effort with ok = false.
IkResult solve_ik(const RobotModel& model, const Pose2& base_next, const JointState& joints_now,
                  std::optional<double> torso_cmd, const Pose3& target, double dt, const IkOptions& opts = {});

/// True iff an occupied cell (static height > 0 or covered by a dynamic
/// obstacle) intersects the footprint disc.
bool check_base_collision(const RobotModel& model, const Pose2& base, const OccupancyGrid& world,
                          std::span<const DynamicObstacle> dynamics = {});

}  // namespace mmsim
