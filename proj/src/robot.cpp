#include "mmsim/robot.h"

#include "mmsim/errors.h"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace mmsim {

namespace {

Quat rpy_quat(const Vec3& rpy) {
    return normalized(Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                      Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()));
}

Pose3 transform_from_json(const json& j) {
    Pose3 p;
    if (j.contains("xyz")) p.position = vec3_from_json(j.at("xyz"));
    if (j.contains("rpy")) p.orientation = rpy_quat(vec3_from_json(j.at("rpy")));
    if (j.contains("quaternion")) p.orientation = normalized(quat_from_json(j.at("quaternion")));
    return p;
}

JointType joint_type_from(const std::string& s) {
    if (s == "revolute") return JointType::Revolute;
    if (s == "prismatic") return JointType::Prismatic;
    if (s == "continuous") return JointType::Continuous;
    throw ConfigError("unknown joint type '" + s + "'");
}

const char* joint_type_name(JointType t) {
    switch (t) {
        case JointType::Revolute: return "revolute";
        case JointType::Prismatic: return "prismatic";
        case JointType::Continuous: return "continuous";
    }
    return "revolute";
}

Range range_from_json(const json& j) {
    Range r{j.at(0).get<double>(), j.at(1).get<double>()};
    if (!(r.min < r.max)) throw ConfigError("range must satisfy min < max: " + j.dump());
    return r;
}

Pose3 joint_motion(const Joint& jt, double q) {
    if (jt.type == JointType::Prismatic) return {jt.axis * q, Quat::Identity()};
    return {Vec3::Zero(), Quat(Eigen::AngleAxisd(q, jt.axis))};
}

void check_dim(const RobotModel& m, const JointState& q) {
    if (q.size() != m.dof()) {
        throw ContractError("joint state has " + std::to_string(q.size()) + " values, model '" + m.name + "' has " +
                            std::to_string(m.dof()) + " joints");
    }
}

}  // namespace

JointState RobotModel::clamp(const JointState& q) const {
    JointState out = q;
    for (int i = 0; i < dof(); ++i) out[i] = joints[i].clamp(q[i]);
    return out;
}

bool RobotModel::within_limits(const JointState& q, double tol) const {
    if (q.size() != dof()) return false;
    for (int i = 0; i < dof(); ++i) {
        const Joint& j = joints[i];
        if (j.bounded() && (q[i] < j.lower - tol || q[i] > j.upper + tol)) return false;
    }
    return true;
}

RobotModel robot_from_json(const json& j) {
    RobotModel m;
    try {
        m.name = j.at("name").get<std::string>();
        const std::string drive = j.at("drive").get<std::string>();
        if (drive == "omni" || drive == "omnidirectional") {
            m.drive = DriveType::Omnidirectional;
        } else if (drive == "differential") {
            m.drive = DriveType::Differential;
        } else {
            throw ConfigError("unknown drive type '" + drive + "'");
        }
        m.footprint_radius = j.at("footprint_radius").get<double>();
        m.base_diagonal = j.value("base_diagonal", 2.0 * m.footprint_radius);
        m.arm_reach = j.at("arm_reach").get<double>();
        m.learn_torso = j.value("learn_torso", false);
        for (const json& jj : j.at("joints")) {
            Joint jt;
            jt.name = jj.at("name").get<std::string>();
            jt.type = joint_type_from(jj.at("type").get<std::string>());
            jt.parent = transform_from_json(jj);
            jt.axis = vec3_from_json(jj.at("axis")).normalized();
            if (jt.bounded()) {
                const Range r = range_from_json(jj.at("limits"));
                jt.lower = r.min;
                jt.upper = r.max;
            } else {
                jt.lower = -std::numeric_limits<double>::infinity();
                jt.upper = std::numeric_limits<double>::infinity();
            }
            jt.max_velocity = jj.at("max_velocity").get<double>();
            if (!(jt.max_velocity > 0.0)) throw ConfigError("joint '" + jt.name + "': max_velocity must be > 0");
            m.joints.push_back(jt);
        }
        if (j.contains("torso_joint") && !j.at("torso_joint").is_null()) {
            const std::string torso = j.at("torso_joint").get<std::string>();
            for (int i = 0; i < m.dof(); ++i)
                if (m.joints[i].name == torso) m.torso_index = i;
            if (!m.torso_index) throw ConfigError("torso joint '" + torso + "' not in joint list");
        }
        m.ee_offset = transform_from_json(j.at("ee_offset"));
        const auto home = j.at("home_joints").get<std::vector<double>>();
        if (static_cast<int>(home.size()) != m.dof()) throw ConfigError("home_joints length does not match joints");
        m.home_joints = Eigen::Map<const Eigen::VectorXd>(home.data(), static_cast<Eigen::Index>(home.size()));
        if (j.contains("zero_ee_pose")) m.zero_ee_pose = pose3_from_json(j.at("zero_ee_pose"));
        const json& c = j.at("constraints");
        m.constraints.max_linear_velocity = c.at("max_linear_velocity").get<double>();
        m.constraints.max_angular_velocity = c.at("max_angular_velocity").get<double>();
        m.constraints.goal_height = range_from_json(c.at("goal_height"));
        m.constraints.restricted_height = range_from_json(c.at("restricted_height"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("robot config: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("robot config: ") + e.what());
    }
    if (!m.within_limits(m.home_joints)) throw ConfigError("robot '" + m.name + "': home_joints outside limits");
    return m;
}

json robot_to_json(const RobotModel& m) {
    json joints = json::array();
    for (const Joint& jt : m.joints) {
        json jj{{"name", jt.name},
                {"type", joint_type_name(jt.type)},
                {"xyz", to_json(jt.parent.position)},
                {"quaternion", quat_to_json(jt.parent.orientation)},
                {"axis", to_json(jt.axis)},
                {"max_velocity", jt.max_velocity}};
        if (jt.bounded()) jj["limits"] = json::array({jt.lower, jt.upper});
        joints.push_back(jj);
    }
    json j{{"name", m.name},
           {"drive", m.drive == DriveType::Omnidirectional ? "omni" : "differential"},
           {"footprint_radius", m.footprint_radius},
           {"base_diagonal", m.base_diagonal},
           {"arm_reach", m.arm_reach},
           {"learn_torso", m.learn_torso},
           {"joints", joints},
           {"ee_offset", {{"xyz", to_json(m.ee_offset.position)}, {"quaternion", quat_to_json(m.ee_offset.orientation)}}},
           {"home_joints", std::vector<double>(m.home_joints.data(), m.home_joints.data() + m.home_joints.size())},
           {"constraints",
            {{"max_linear_velocity", m.constraints.max_linear_velocity},
             {"max_angular_velocity", m.constraints.max_angular_velocity},
             {"goal_height", {m.constraints.goal_height.min, m.constraints.goal_height.max}},
             {"restricted_height", {m.constraints.restricted_height.min, m.constraints.restricted_height.max}}}}};
    j["torso_joint"] = m.torso_index ? json(m.joints[*m.torso_index].name) : json(nullptr);
    if (m.zero_ee_pose) j["zero_ee_pose"] = to_json(*m.zero_ee_pose);
    return j;
}

RobotModel load_robot(const std::filesystem::path& path) {
    try {
        return robot_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.find(path.string()) != std::string::npos) throw;
        throw ConfigError("'" + path.string() + "': " + msg);
    }
}

Pose3 forward_kinematics(const RobotModel& model, const Pose2& base, const JointState& joints) {
    check_dim(model, joints);
    Pose3 t = Pose3::from_pose2(base);
    for (int i = 0; i < model.dof(); ++i) t = t * model.joints[i].parent * joint_motion(model.joints[i], joints[i]);
    return t * model.ee_offset;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian(const RobotModel& model, const Pose2& base, const JointState& joints,
                                                   Pose3* ee) {
    check_dim(model, joints);
    const int n = model.dof();
    std::vector<Vec3> origins(n), axes(n);
    Pose3 t = Pose3::from_pose2(base);
    for (int i = 0; i < n; ++i) {
        const Joint& jt = model.joints[i];
        t = t * jt.parent;
        origins[i] = t.position;
        axes[i] = t.orientation * jt.axis;
        t = t * joint_motion(jt, joints[i]);
    }
    t = t * model.ee_offset;
    Eigen::Matrix<double, 6, Eigen::Dynamic> J(6, n);
    for (int i = 0; i < n; ++i) {
        if (model.joints[i].type == JointType::Prismatic) {
            J.col(i) << axes[i], Vec3::Zero();
        } else {
            J.col(i) << axes[i].cross(t.position - origins[i]), axes[i];
        }
    }
    if (ee) *ee = t;
    return J;
}

VelocityCommand clamp_command(const RobotModel& model, const VelocityCommand& cmd) {
    VelocityCommand out = cmd;
    const double vmax = model.constraints.max_linear_velocity;
    if (model.drive == DriveType::Differential) out.vy = 0.0;
    const double speed = std::hypot(out.vx, out.vy);
    if (speed > vmax) {
        out.vx *= vmax / speed;
        out.vy *= vmax / speed;
    }
    const double wmax = model.constraints.max_angular_velocity;
    out.omega = std::clamp(out.omega, -wmax, wmax);
    if (out.torso && model.torso_index) {
        const double tmax = model.joints[*model.torso_index].max_velocity;
        out.torso = std::clamp(*out.torso, -tmax, tmax);
    }
    return out;
}

Pose2 integrate_base(const RobotModel& model, const Pose2& base, const VelocityCommand& cmd, double dt) {
    if (!(dt > 0.0)) throw ContractError("integrate_base: dt must be positive");
    const VelocityCommand c = clamp_command(model, cmd);
    const double cs = std::cos(base.theta), sn = std::sin(base.theta);
    return {base.x + (cs * c.vx - sn * c.vy) * dt, base.y + (sn * c.vx + cs * c.vy) * dt, base.theta + c.omega * dt};
}

IkResult solve_ik(const RobotModel& model, const Pose2& base_next, const JointState& joints_now,
                  std::optional<double> torso_cmd, const Pose3& target, double dt, const IkOptions& opts) {
    check_dim(model, joints_now);
    if (!(dt > 0.0)) throw ContractError("solve_ik: dt must be positive");
    const int n = model.dof();

    // per-joint box: velocity-limited step intersected with position limits
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        const Joint& jt = model.joints[i];
        const double step = jt.max_velocity * dt;
        lo[i] = std::max(jt.lower, joints_now[i] - step);
        hi[i] = std::min(jt.upper, joints_now[i] + step);
        if (lo[i] > hi[i]) lo[i] = hi[i] = jt.clamp(joints_now[i]);
    }

    JointState q = joints_now;
    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
        if (torso_cmd && model.torso_index && i == *model.torso_index) {
            const double v = std::clamp(*torso_cmd, -model.joints[i].max_velocity, model.joints[i].max_velocity);
            q[i] = std::clamp(joints_now[i] + v * dt, lo[i], hi[i]);
        } else {
            active.push_back(i);
        }
    }
    const int na = static_cast<int>(active.size());

    auto residual = [&](const JointState& qq, Eigen::Matrix<double, 6, Eigen::Dynamic>* J) {
        Pose3 ee;
        Eigen::Matrix<double, 6, 1> e;
        if (J) {
            *J = jacobian(model, base_next, qq, &ee);
        } else {
            ee = forward_kinematics(model, base_next, qq);
        }
        e << target.position - ee.position, rotation_error(ee.orientation, target.orientation);
        return e;
    };

    Eigen::VectorXd metric(na);
    for (int k = 0; k < na; ++k) metric[k] = 1.0 / model.joints[active[k]].max_velocity;

    IkResult res;
    double lambda = opts.damping;
    Eigen::Matrix<double, 6, Eigen::Dynamic> J;
    Eigen::Matrix<double, 6, 1> e = residual(q, &J);
    double err = e.squaredNorm();
    for (int it = 0; it < opts.max_iterations && na > 0; ++it) {
        if (err <= opts.converge_tolerance * opts.converge_tolerance) break;
        // Active set: joints the step would push out of their box are pinned
        // to the bound and the rest re-solve for the remaining residual.
        JointState trial = q;
        std::vector<int> free = active;
        Eigen::Matrix<double, 6, 1> rem = e;
        while (!free.empty()) {
            const int nf = static_cast<int>(free.size());
            Eigen::Matrix<double, 6, Eigen::Dynamic> Jf(6, nf);
            Eigen::VectorXd wf(nf);
            for (int k = 0; k < nf; ++k) {
                Jf.col(k) = J.col(free[k]);
                wf[k] = metric[std::find(active.begin(), active.end(), free[k]) - active.begin()];
            }
            Eigen::MatrixXd A = Jf.transpose() * Jf;
            A.diagonal() += lambda * wf;
            const Eigen::VectorXd delta = A.ldlt().solve(Jf.transpose() * rem);
            std::vector<int> keep;
            for (int k = 0; k < nf; ++k) {
                const int i = free[k];
                const double v = q[i] + delta[k];
                if (v < lo[i] || v > hi[i]) {
                    trial[i] = std::clamp(v, lo[i], hi[i]);
                    rem -= J.col(i) * (trial[i] - q[i]);
                } else {
                    keep.push_back(i);
                }
            }
            if (static_cast<int>(keep.size()) == nf) {
                for (int k = 0; k < nf; ++k) trial[free[k]] = q[free[k]] + delta[k];
                break;
            }
            free = std::move(keep);
        }
        ++res.iterations;
        Eigen::Matrix<double, 6, Eigen::Dynamic> Jt;
        const Eigen::Matrix<double, 6, 1> et = residual(trial, &Jt);
        const double errt = et.squaredNorm();
        if (errt < err) {
            const double moved = (trial - q).lpNorm<Eigen::Infinity>();
            q = trial;
            J = Jt;
            e = et;
            err = errt;
            lambda = std::max(opts.damping, 0.5 * lambda);
            if (moved < 1e-15) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e8) break;
        }
    }

    res.joints = q;
    res.achieved = forward_kinematics(model, base_next, q);
    res.position_error = (res.achieved.position - target.position).norm();
    res.rotation_error = d_rot(res.achieved.orientation, normalized(target.orientation));
    res.ok = res.position_error < opts.accept_position && res.rotation_error < opts.accept_rotation;
    return res;
}

bool check_base_collision(const RobotModel& model, const Pose2& base, const OccupancyGrid& world,
                          std::span<const DynamicObstacle> dynamics) {
    const GridGeometry& g = world.geom;
    const double r = model.footprint_radius;
    const double half = 0.5 * g.resolution;

    std::vector<const DynamicObstacle*> near;
    for (const auto& d : dynamics) {
        if ((d.shape.center - base.position()).norm() <= r + d.shape.bounding_radius() + g.resolution) near.push_back(&d);
    }

    const Vec2 local = g.origin.apply_inverse(base.position());
    const int x0 = std::max(0, static_cast<int>(std::floor((local.x() - r) / g.resolution)) - 1);
    const int x1 = std::min(g.width - 1, static_cast<int>(std::floor((local.x() + r) / g.resolution)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor((local.y() - r) / g.resolution)) - 1);
    const int y1 = std::min(g.height - 1, static_cast<int>(std::floor((local.y() + r) / g.resolution)) + 1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            // distance from the disc center to the cell square (grid-local frame)
            const double cx = (x + 0.5) * g.resolution, cy = (y + 0.5) * g.resolution;
            const double dx = std::max(std::abs(local.x() - cx) - half, 0.0);
            const double dy = std::max(std::abs(local.y() - cy) - half, 0.0);
            if (dx * dx + dy * dy > r * r) continue;
            if (world.at(x, y) > 0.0) return true;
            if (!near.empty()) {
                const Vec2 center = g.cell_center(x, y);
                for (const DynamicObstacle* d : near)
                    if (d->shape.contains(center)) return true;
            }
        }
    }
    return false;
}

}  // namespace mmsim
