#pragma once

#include "mmsim/env.h"

namespace mmsim {

struct GreedyConfig {
    double k_linear = 2.0;   ///< 1/s, on the offset to the intermediate goal
    double k_angular = 1.5;  ///< 1/s, on the heading error
    double k_torso = 2.0;    ///< 1/s, on the desired EE height error
    double turn_first = 0.5;  ///< rad; differential drives rotate in place above this
    double slow_radius = 0.6;  ///< m; obstacles in the coarse map closer than this slow the EE
    double min_ee_scale = 0.3;
    double max_lag = 0.25;     ///< m; desired EE further ahead than this slows the EE
    Vec2 standoff = Vec2::Zero();  ///< home EE offset in the base frame
    double home_ee_z = 0.0;
    double home_torso = 0.0;
    double torso_max_velocity = 0.0;
    bool omnidirectional = true;
    bool learned_torso = false;
    int torso_slot = -1;  ///< index into Observation::joints
    double v_ee_max = 0.2;
    double max_linear_velocity = 0.2;
    double max_angular_velocity = 1.0;

    /// Fills the robot-dependent fields from the home configuration.
    static GreedyConfig for_robot(const RobotModel& robot, const EnvConfig& env);
    /// Throws ConfigError on non-positive gains.
    void validate() const;
};

/// Scripted controller: chases the intermediate goal with the base, keeps
/// the torso at the desired EE height and requests full EE speed unless the
/// base lags behind or obstacles are close.
Action greedy_act(const Observation& obs, const GreedyConfig& cfg);

Policy greedy_policy(const GreedyConfig& cfg);

}  // namespace mmsim
