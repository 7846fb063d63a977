#pragma once

#include "mmsim/robot.h"

#include <string>

inline mmsim::RobotModel load_test_robot(const std::string& name) {
    return mmsim::load_robot(std::string(MMSIM_SOURCE_DIR) + "/configs/robots/" + name + ".json");
}
