#include <doctest.h>

#include "mmsim/errors.h"
#include "mmsim/geometry.h"
#include "mmsim/rng.h"

#include <cmath>
#include <numbers>

using namespace mmsim;
using doctest::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

Quat about_z(double angle) { return Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ())); }
}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kPi) == Approx(kPi));
    CHECK(wrap_angle(-kPi) == Approx(kPi));
    CHECK(wrap_angle(3 * kPi) == Approx(kPi));
    CHECK(wrap_angle(2 * kPi + 0.5) == Approx(0.5));
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = wrap_angle(rng.uniform(-100.0, 100.0));
        CHECK(a > -kPi);
        CHECK(a <= kPi);
    }
    CHECK(Pose2(0, 0, 7.0).theta == Approx(7.0 - 2 * kPi));
}

TEST_CASE("d_rot identities and hand values") {
    const Quat q = normalized(Quat(0.3, -0.2, 0.5, 0.7));
    CHECK(d_rot(q, q) == Approx(0.0).epsilon(1e-15));
    const Quat neg(-q.w(), -q.x(), -q.y(), -q.z());
    CHECK(d_rot(q, neg) == Approx(0.0));
    // <identity, 90 deg about z> = cos(45 deg)
    const double c = std::cos(kPi / 4);
    CHECK(d_rot(Quat::Identity(), about_z(kPi / 2)) == Approx(1.0 - c * c).epsilon(1e-14));
    CHECK(d_rot(Quat::Identity(), about_z(kPi)) == Approx(1.0));
}

TEST_CASE("d_rot rejects non-unit input") {
    CHECK_THROWS_AS(d_rot(Quat(1.1, 0, 0, 0), Quat::Identity()), ContractError);
    CHECK_NOTHROW(d_rot(Quat(1.0 + 5e-7, 0, 0, 0), Quat::Identity()));
}

TEST_CASE("d_rot symmetric and sign invariant over random pairs") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Quat a = rng.unit_quaternion(), b = rng.unit_quaternion();
        const Quat na(-a.w(), -a.x(), -a.y(), -a.z());
        const double d = d_rot(a, b);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(d == Approx(d_rot(b, a)).epsilon(1e-14));
        CHECK(d == Approx(d_rot(na, b)).epsilon(1e-14));
    }
}

TEST_CASE("slerp endpoints and halfway rotation") {
    const Quat a = about_z(0.2) * Quat(Eigen::AngleAxisd(0.4, Vec3::UnitX()));
    const Quat b = about_z(-1.3);
    CHECK(d_rot(slerp(a, b, 0.0), a) < 1e-15);
    CHECK(d_rot(slerp(a, b, 1.0), b) < 1e-15);
    CHECK(d_rot(slerp(a, b, -3.0), a) < 1e-15);
    CHECK(d_rot(slerp(a, b, 7.0), b) < 1e-15);
    // axis-angle halving
    const Quat half = slerp(Quat::Identity(), about_z(kPi / 2), 0.5);
    const Quat expect = about_z(kPi / 4);
    CHECK(d_rot(half, expect) < 1e-14);
    CHECK(std::abs(std::abs(half.w()) - std::cos(kPi / 8)) < 1e-14);
}

TEST_CASE("slerp takes the shorter arc and has constant rate") {
    const Quat a = about_z(0.0);
    Quat b = about_z(1.0);
    b = Quat(-b.w(), -b.x(), -b.y(), -b.z());
    for (double t : {0.1, 0.25, 0.5, 0.8}) {
        const Quat q = slerp(a, b, t);
        CHECK(std::abs(yaw_of(q) - t * 1.0) < 1e-12);
    }
}

TEST_CASE("slerp output stays unit norm for random pairs") {
    Rng rng(5);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Quat a = rng.unit_quaternion(), b = rng.unit_quaternion();
        worst = std::max(worst, std::abs(slerp(a, b, rng.uniform01()).norm() - 1.0));
    }
    CHECK(worst < 1e-9);
    // nearly identical inputs use the linear fallback
    const Quat a = about_z(0.3), b = about_z(0.3 + 1e-10);
    CHECK(std::abs(slerp(a, b, 0.5).norm() - 1.0) < 1e-12);
}

TEST_CASE("transform_to_frame hand cases") {
    const Pose3 p(Vec3(1, 0, 0), Quat::Identity());
    const Pose3 same = transform_to_frame(p, Pose2());
    CHECK((same.position - p.position).norm() == 0.0);
    const Pose3 shifted = transform_to_frame(p, Pose2(1, 0, 0));
    CHECK(shifted.position.norm() < 1e-15);
    // rotating the frame by +90 deg puts a world +x point at frame -y
    const Pose3 rotated = transform_to_frame(p, Pose2(0, 0, kPi / 2));
    CHECK(rotated.position.x() == Approx(0.0).epsilon(1e-15));
    CHECK(rotated.position.y() == Approx(-1.0));
    CHECK(rotated.position.z() == Approx(0.0));
    CHECK(d_rot(rotated.orientation, about_z(-kPi / 2)) < 1e-15);
}

TEST_CASE("transform_to_frame round trip") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Pose3 p(Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 2)), rng.unit_quaternion());
        const Pose2 f(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi));
        const Pose3 back = transform_from_frame(transform_to_frame(p, f), f);
        CHECK((back.position - p.position).norm() < 1e-12);
        CHECK(d_rot(back.orientation, p.orientation) < 1e-12);
        CHECK(std::abs(back.orientation.norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("pose composition and inverse") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const Pose3 a(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), rng.unit_quaternion());
        const Pose3 b(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), rng.unit_quaternion());
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
        const Pose3 id = a * a.inverse();
        CHECK(id.position.norm() < 1e-12);
        CHECK(d_rot(id.orientation, Quat::Identity()) < 1e-12);
    }
}

TEST_CASE("rotation_error is the shortest rotation vector") {
    const Vec3 e = rotation_error(Quat::Identity(), about_z(0.5));
    CHECK(e.z() == Approx(0.5));
    CHECK(e.head<2>().norm() < 1e-15);
    const Vec3 wrap = rotation_error(about_z(3.0), about_z(-3.0));
    CHECK(wrap.z() == Approx(2 * kPi - 6.0));
}

TEST_CASE("quaternion order is w, x, y, z") {
    const Quat q = normalized(Quat(0.5, 0.1, -0.2, 0.3));
    const auto v = to_wxyz(q);
    CHECK(v[0] == q.w());
    CHECK(v[1] == q.x());
    CHECK(v[3] == q.z());
    const Quat r = from_wxyz(v);
    CHECK(r.coeffs() == q.coeffs());
}
