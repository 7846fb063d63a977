#include "mmsim/json_util.h"

#include "mmsim/errors.h"

#include <fstream>
#include <sstream>

namespace mmsim {

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }
json to_json(const Pose2& p) { return json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }
json to_json(const Pose3& p) { return json{{"position", to_json(p.position)}, {"orientation", quat_to_json(p.orientation)}}; }

Vec2 vec2_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ParseError("expected a 2-vector, got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector, got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Quat quat_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("expected a [w,x,y,z] quaternion, got " + j.dump());
    // raw values: files written by this library are already unit norm and
    // must round-trip bit-exactly
    return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

Pose2 pose2_from_json(const json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()};
}

Pose3 pose3_from_json(const json& j) {
    Pose3 p;
    p.position = vec3_from_json(j.at("position"));
    p.orientation = quat_from_json(j.at("orientation"));
    if (std::abs(p.orientation.norm() - 1.0) > 1e-6) p.orientation.normalize();
    return p;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string dump_pretty(const json& j) { return j.dump(2) + "\n"; }

}  // namespace mmsim
