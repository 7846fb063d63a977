#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace mmsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Planar pose (base frame). theta is kept in (-pi, pi].
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2() = default;
    Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

    Vec2 position() const { return {x, y}; }
    /// Maps a point expressed in this frame into the parent frame.
    Vec2 apply(const Vec2& p) const;
    /// Maps a parent-frame point into this frame.
    Vec2 apply_inverse(const Vec2& p) const;
};

/// Rigid transform with a unit quaternion. Quaternions are always
/// serialized (w, x, y, z).
struct Pose3 {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();

    Pose3() = default;
    Pose3(const Vec3& p, const Quat& q);

    static Pose3 identity() { return {}; }
    static Pose3 from_pose2(const Pose2& p, double z = 0.0);

    Pose3 operator*(const Pose3& rhs) const;
    Pose3 inverse() const;
    Vec3 apply(const Vec3& p) const { return position + orientation * p; }
};

Quat normalized(const Quat& q);
Quat yaw_quat(double yaw);
double yaw_of(const Quat& q);

std::array<double, 4> to_wxyz(const Quat& q);
Quat from_wxyz(const std::array<double, 4>& wxyz);

/// Rotational distance 1 - <a,b>^2, in [0,1]. Throws ContractError when an
/// input is further than 1e-6 from unit norm.
double d_rot(const Quat& a, const Quat& b);

/// Shortest-arc spherical interpolation, t clamped to [0,1]. Falls back to
/// normalized lerp when the inputs are nearly identical.
Quat slerp(const Quat& a, const Quat& b, double t);

/// Expresses a world pose in the planar frame `frame` (lifted to z = 0).
Pose3 transform_to_frame(const Pose3& p, const Pose2& frame);
Pose3 transform_from_frame(const Pose3& p, const Pose2& frame);

Vec3 rotate_to_frame(const Vec3& v, const Pose2& frame);

/// Rotation vector (axis * angle) taking `from` onto `to`, shortest arc.
Vec3 rotation_error(const Quat& from, const Quat& to);

}  // namespace mmsim
