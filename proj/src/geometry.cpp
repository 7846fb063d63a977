#include "mmsim/geometry.h"

#include "mmsim/errors.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mmsim {

namespace {
constexpr double kUnitTolerance = 1e-6;
constexpr double kSlerpLerpThreshold = 1.0 - 1e-9;

void require_unit(const Quat& q, const char* name) {
    const double n = q.norm();
    if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
        throw ContractError(std::string("d_rot: quaternion '") + name + "' is not unit norm (|q| = " +
                            std::to_string(n) + ")");
    }
}
}  // namespace

double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    if (a > -pi && a <= pi) return a;
    a = std::remainder(a, 2.0 * pi);
    if (a <= -pi) a += 2.0 * pi;
    return a;
}

Vec2 Pose2::apply(const Vec2& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
}

Vec2 Pose2::apply_inverse(const Vec2& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double dx = p.x() - x, dy = p.y() - y;
    return {c * dx + s * dy, -s * dx + c * dy};
}

Pose3::Pose3(const Vec3& p, const Quat& q) : position(p), orientation(normalized(q)) {}

Pose3 Pose3::from_pose2(const Pose2& p, double z) { return {Vec3(p.x, p.y, z), yaw_quat(p.theta)}; }

Pose3 Pose3::operator*(const Pose3& rhs) const {
    return {position + orientation * rhs.position, orientation * rhs.orientation};
}

Pose3 Pose3::inverse() const {
    const Quat qi = orientation.conjugate();
    return {-(qi * position), qi};
}

Quat normalized(const Quat& q) {
    Quat r = q;
    r.normalize();
    return r;
}

Quat yaw_quat(double yaw) { return {std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)}; }

double yaw_of(const Quat& q) {
    return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()), 1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

std::array<double, 4> to_wxyz(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }

Quat from_wxyz(const std::array<double, 4>& v) { return normalized(Quat(v[0], v[1], v[2], v[3])); }

double d_rot(const Quat& a, const Quat& b) {
    require_unit(a, "a");
    require_unit(b, "b");
    const double dot = a.dot(b);
    return std::clamp(1.0 - dot * dot, 0.0, 1.0);
}

Quat slerp(const Quat& a, const Quat& b_in, double t) {
    t = std::clamp(t, 0.0, 1.0);
    Quat b = b_in;
    double dot = a.dot(b);
    if (dot < 0.0) {
        b.coeffs() = -b.coeffs();
        dot = -dot;
    }
    if (t == 0.0) return normalized(a);
    if (t == 1.0) return normalized(b);
    Quat r;
    if (dot > kSlerpLerpThreshold) {
        r.coeffs() = (1.0 - t) * a.coeffs() + t * b.coeffs();
    } else {
        const double theta = std::acos(std::min(dot, 1.0));
        const double s = std::sin(theta);
        r.coeffs() = (std::sin((1.0 - t) * theta) / s) * a.coeffs() + (std::sin(t * theta) / s) * b.coeffs();
    }
    return normalized(r);
}

Pose3 transform_to_frame(const Pose3& p, const Pose2& frame) {
    const Pose3 f = Pose3::from_pose2(frame);
    return f.inverse() * p;
}

Pose3 transform_from_frame(const Pose3& p, const Pose2& frame) { return Pose3::from_pose2(frame) * p; }

Vec3 rotate_to_frame(const Vec3& v, const Pose2& frame) {
    const double c = std::cos(frame.theta), s = std::sin(frame.theta);
    return {c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()};
}

Vec3 rotation_error(const Quat& from, const Quat& to) {
    Quat d = to * from.conjugate();
    if (d.w() < 0.0) d.coeffs() = -d.coeffs();
    const Vec3 v = d.vec();
    const double sn = v.norm();
    if (sn < 1e-12) return 2.0 * v;
    const double angle = 2.0 * std::atan2(sn, d.w());
    return v * (angle / sn);
}

}  // namespace mmsim
