#include "mmsim/baseline.h"

#include "mmsim/errors.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmsim {

GreedyConfig GreedyConfig::for_robot(const RobotModel& robot, const EnvConfig& env) {
    GreedyConfig c;
    const Pose3 home = forward_kinematics(robot, Pose2(), robot.home_joints);
    c.standoff = home.position.head<2>();
    c.home_ee_z = home.position.z();
    c.omnidirectional = robot.drive == DriveType::Omnidirectional;
    c.learned_torso = robot.has_learned_torso();
    if (robot.torso_index) {
        c.torso_slot = *robot.torso_index;
        c.home_torso = robot.home_joints[*robot.torso_index];
        c.torso_max_velocity = robot.joints[*robot.torso_index].max_velocity;
    }
    c.v_ee_max = env.v_ee_max;
    c.max_linear_velocity = robot.constraints.max_linear_velocity;
    c.max_angular_velocity = robot.constraints.max_angular_velocity;
    return c;
}

void GreedyConfig::validate() const {
    if (!(k_linear > 0.0) || !(k_angular > 0.0) || !(k_torso > 0.0)) throw ConfigError("greedy: gains must be positive");
    if (!(v_ee_max > 0.0) || !(max_linear_velocity > 0.0) || !(max_angular_velocity > 0.0))
        throw ConfigError("greedy: velocity limits must be positive");
}

namespace {

// Distance from the base to the closest occupied coarse cell center.
double nearest_obstacle(const LocalMap& m) {
    const double half = 0.5 * m.spec.cells * m.spec.resolution;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.spec.cells; ++j) {
        for (int i = 0; i < m.spec.cells; ++i) {
            if (!m.at(i, j)) continue;
            const double x = (i + 0.5) * m.spec.resolution - half, y = (j + 0.5) * m.spec.resolution - half;
            best = std::min(best, std::hypot(x, y));
        }
    }
    return best;
}

}  // namespace

Action greedy_act(const Observation& obs, const GreedyConfig& cfg) {
    Action a;
    const Vec2 target = obs.goal.position.head<2>() - cfg.standoff;
    const double dist = target.norm();
    const double bearing = dist > 0.05 ? std::atan2(target.y(), target.x()) : 0.0;
    const double speed = std::min(cfg.max_linear_velocity, cfg.k_linear * dist);

    if (cfg.omnidirectional) {
        if (dist > 0.0) {
            a.vx = speed * target.x() / dist / cfg.max_linear_velocity;
            a.vy = speed * target.y() / dist / cfg.max_linear_velocity;
        }
        a.omega = cfg.k_angular * bearing / cfg.max_angular_velocity;
    } else {
        a.omega = cfg.k_angular * bearing / cfg.max_angular_velocity;
        if (std::abs(bearing) <= cfg.turn_first) a.vx = speed * std::cos(bearing) / cfg.max_linear_velocity;
    }

    if (cfg.learned_torso && cfg.torso_slot >= 0 && cfg.torso_max_velocity > 0.0) {
        const double reachable = cfg.home_ee_z + (obs.joints[cfg.torso_slot] - cfg.home_torso);
        a.torso = cfg.k_torso * (obs.desired.position.z() - reachable) / cfg.torso_max_velocity;
    }

    double scale = 1.0;
    const double lag = (obs.desired.position.head<2>() - cfg.standoff).norm();
    if (lag > cfg.max_lag) scale = std::min(scale, cfg.max_lag / lag);
    const double clearance = nearest_obstacle(obs.coarse);
    if (clearance < cfg.slow_radius) scale = std::min(scale, clearance / cfg.slow_radius);
    a.a_ee = cfg.v_ee_max * std::max(cfg.min_ee_scale, scale);
    return clamp_action(a, cfg.v_ee_max);
}

Policy greedy_policy(const GreedyConfig& cfg) {
    cfg.validate();
    return [cfg](const Observation& obs) { return greedy_act(obs, cfg); };
}

}  // namespace mmsim
