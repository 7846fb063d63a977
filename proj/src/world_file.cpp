#include "mmsim/errors.h"
#include "mmsim/gridmap.h"

namespace mmsim {

namespace {

json shape_to_json(const Shape& s) {
    return json{{"type", s.type == ShapeType::Rectangle ? "rectangle" : "ellipse"},
                {"center", to_json(s.center)},
                {"size", to_json(s.size)},
                {"rotation", s.rotation},
                {"height", s.height}};
}

Shape shape_from_json(const json& j) {
    Shape s;
    const std::string type = j.at("type").get<std::string>();
    if (type == "rectangle") {
        s.type = ShapeType::Rectangle;
    } else if (type == "ellipse") {
        s.type = ShapeType::Ellipse;
    } else {
        throw ParseError("unknown shape type '" + type + "'");
    }
    s.center = vec2_from_json(j.at("center"));
    s.size = vec2_from_json(j.at("size"));
    s.rotation = j.value("rotation", 0.0);
    s.height = j.at("height").get<double>();
    if (!(s.size.x() > 0.0) || !(s.size.y() > 0.0)) throw InvalidShapeError("shape extents must be positive");
    if (s.height < 0.0) throw InvalidShapeError("shape height must be non-negative");
    return s;
}

}  // namespace

json world_to_json(const WorldDescription& w) {
    json shapes = json::array();
    for (const Shape& s : w.shapes) shapes.push_back(shape_to_json(s));
    json dyn = json::array();
    for (const DynamicObstacle& d : w.dynamics) dyn.push_back({{"shape", shape_to_json(d.shape)}, {"velocity", to_json(d.velocity)}});
    return json{{"bounds", json::array({w.bounds.min_x, w.bounds.min_y, w.bounds.max_x, w.bounds.max_y})},
                {"resolution", w.resolution},
                {"shapes", shapes},
                {"dynamics", dyn}};
}

WorldDescription world_from_json(const json& j) {
    WorldDescription w;
    try {
        const json& b = j.at("bounds");
        if (!b.is_array() || b.size() != 4) throw ParseError("world: bounds must be [min_x, min_y, max_x, max_y]");
        w.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        w.resolution = j.at("resolution").get<double>();
        if (!(w.resolution > 0.0)) throw ParseError("world: resolution must be positive");
        for (const json& s : j.at("shapes")) w.shapes.push_back(shape_from_json(s));
        if (j.contains("dynamics")) {
            for (const json& d : j.at("dynamics")) {
                w.dynamics.push_back({shape_from_json(d.at("shape")), vec2_from_json(d.at("velocity"))});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("world: ") + e.what());
    }
    return w;
}

}  // namespace mmsim
