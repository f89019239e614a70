#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "singulate/scene.hpp"

namespace singulate {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* scene_schema_id = "singulate.scene/1";

inline nlohmann::json to_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

inline Vec2 vec2_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw SchemaError("expected [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline nlohmann::json to_json(const Scene& scene) {
    nlohmann::json j;
    j["schema"] = scene_schema_id;
    j["table"] = {{"width", scene.table.width},
                  {"height", scene.table.height},
                  {"origin", to_json(scene.table.origin)}};
    j["rng_seed"] = scene.rng_seed;
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : scene.objects) {
        nlohmann::json poly = nlohmann::json::array();
        for (Vec2 v : o.polygon) poly.push_back(to_json(v));
        objs.push_back({{"id", o.id},
                        {"polygon", poly},
                        {"pose", {{"t", to_json(o.pose.t)}, {"theta", o.pose.theta}}},
                        {"mass_center", to_json(o.mass_center)}});
    }
    j["objects"] = objs;
    return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
    if (!j.contains("schema")) throw SchemaError("scene file missing schema field");
    if (j["schema"] != scene_schema_id)
        throw SchemaError("unsupported scene schema: " + j["schema"].dump());
    Scene scene;
    const auto& t = j.at("table");
    scene.table.width = t.at("width").get<double>();
    scene.table.height = t.at("height").get<double>();
    scene.table.origin = vec2_from_json(t.at("origin"));
    scene.rng_seed = j.value("rng_seed", std::uint64_t{0});
    for (const auto& jo : j.at("objects")) {
        SceneObject o;
        o.id = jo.at("id").get<int>();
        for (const auto& jv : jo.at("polygon")) o.polygon.push_back(vec2_from_json(jv));
        o.pose.t = vec2_from_json(jo.at("pose").at("t"));
        o.pose.theta = jo.at("pose").at("theta").get<double>();
        o.mass_center = vec2_from_json(jo.at("mass_center"));
        scene.objects.push_back(std::move(o));
    }
    validate_scene(scene);
    return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_json(scene).dump(2) << "\n";
}

inline Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scene file is not valid JSON: ") + e.what());
    }
    return scene_from_json(j);
}

}  // namespace singulate
