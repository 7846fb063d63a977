#pragma once

#include "mmsim/geometry.h"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace mmsim {

using nlohmann::json;

json to_json(const Vec2& v);
json to_json(const Vec3& v);
json quat_to_json(const Quat& q);  // [w, x, y, z]
json to_json(const Pose2& p);
json to_json(const Pose3& p);

Vec2 vec2_from_json(const json& j);
Vec3 vec3_from_json(const json& j);
Quat quat_from_json(const json& j);
Pose2 pose2_from_json(const json& j);
Pose3 pose3_from_json(const json& j);

/// Throws ConfigError naming the path on IO or parse failure.
json read_json_file(const std::filesystem::path& path);

/// Writes via a temporary file and rename so readers never see a partial
/// file. Throws std::runtime_error naming the path.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Stable dump: sorted keys (nlohmann's default object order), 2-space indent.
std::string dump_pretty(const json& j);

}  // namespace mmsim
