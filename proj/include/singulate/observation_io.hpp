#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "singulate/perception.hpp"
#include "singulate/scene_json.hpp"

namespace singulate {

inline constexpr const char* observation_schema_id = "singulate.observation/1";

/// Binary 8-bit PGM for any [0,1] intensity grid.
inline void save_pgm(const std::vector<float>& pixels, int width, int height,
                     const std::string& path) {
    if (pixels.size() != std::size_t(width) * height)
        throw std::invalid_argument("save_pgm: pixel count disagrees with dimensions");
    std::ofstream pgm(path, std::ios::binary);
    if (!pgm) throw std::runtime_error("cannot open for writing: " + path);
    pgm << "P5\n" << width << " " << height << "\n255\n";
    for (float p : pixels) {
        double v = std::clamp(double(p), 0.0, 1.0);
        pgm.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
}

/// Write pixels as binary 8-bit PGM and the view plus run-length encoded
/// segment map as a JSON sidecar: <base>.pgm and <base>.json.
inline void save_observation(const ObservationImage& obs, const std::string& base_path) {
    std::string pgm_path = base_path + ".pgm";
    save_pgm(obs.pixels, obs.width(), obs.height(), pgm_path);

    nlohmann::json j;
    j["schema"] = observation_schema_id;
    j["view"] = {{"scale", obs.view.scale},
                 {"height", obs.view.height},
                 {"width", obs.view.width},
                 {"world_origin_pixel", to_json(obs.view.world_origin_pixel)}};
    j["pgm"] = std::filesystem::path(pgm_path).filename().string();
    nlohmann::json rle = nlohmann::json::array();
    std::size_t i = 0, n = obs.segment_ids.size();
    while (i < n) {
        std::int32_t id = obs.segment_ids[i];
        std::size_t run = 1;
        while (i + run < n && obs.segment_ids[i + run] == id) ++run;
        rle.push_back(nlohmann::json::array({id, run}));
        i += run;
    }
    j["segment_rle"] = std::move(rle);

    std::string json_path = base_path + ".json";
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + json_path);
    out << j.dump(2) << "\n";
}

/// Inverse of save_observation. Pixel intensities come back 8-bit quantized.
inline ObservationImage load_observation(const std::string& base_path) {
    std::string json_path = base_path + ".json";
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open observation sidecar: " + json_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("observation sidecar is not valid JSON: ") + e.what());
    }
    if (!j.contains("schema") || j["schema"] != observation_schema_id)
        throw SchemaError("unsupported observation schema");

    ObservationImage obs;
    const auto& v = j.at("view");
    obs.view.scale = v.at("scale").get<double>();
    obs.view.height = v.at("height").get<int>();
    obs.view.width = v.at("width").get<int>();
    obs.view.world_origin_pixel = vec2_from_json(v.at("world_origin_pixel"));

    std::string pgm_path =
        (std::filesystem::path(json_path).parent_path() / j.at("pgm").get<std::string>()).string();
    std::ifstream pgm(pgm_path, std::ios::binary);
    if (!pgm) throw std::runtime_error("cannot open PGM: " + pgm_path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    pgm >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255) throw SchemaError("unsupported PGM format");
    if (w != obs.view.width || h != obs.view.height)
        throw SchemaError("PGM dimensions disagree with the sidecar view");
    pgm.get();  // single whitespace byte after the header
    std::vector<char> raw(std::size_t(w) * h);
    pgm.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (pgm.gcount() != static_cast<std::streamsize>(raw.size()))
        throw SchemaError("PGM payload truncated");
    obs.pixels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        obs.pixels[i] = static_cast<float>(static_cast<unsigned char>(raw[i]) / 255.0);

    obs.segment_ids.reserve(raw.size());
    for (const auto& pair : j.at("segment_rle")) {
        std::int32_t id = pair.at(0).get<std::int32_t>();
        std::size_t run = pair.at(1).get<std::size_t>();
        obs.segment_ids.insert(obs.segment_ids.end(), run, id);
    }
    if (obs.segment_ids.size() != raw.size())
        throw SchemaError("segment RLE length disagrees with the image size");
    return obs;
}

}  // namespace singulate
