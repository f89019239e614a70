#pragma once

#include <nlohmann/json.hpp>

#include "singulate/proposals.hpp"
#include "singulate/scene_json.hpp"

namespace singulate {

inline nlohmann::json to_json(const PushHandle& handle) {
    return {{"position", to_json(handle.position)},
            {"normal", to_json(handle.normal)},
            {"segment", handle.segment},
            {"length", handle.length}};
}

inline PushHandle handle_from_json(const nlohmann::json& j) {
    PushHandle handle;
    handle.position = vec2_from_json(j.at("position"));
    handle.normal = vec2_from_json(j.at("normal"));
    handle.segment = j.at("segment").get<int>();
    handle.length = j.at("length").get<double>();
    return handle;
}

inline nlohmann::json to_json(const PushProposal& proposal) {
    return {{"c", to_json(proposal.c)},
            {"alpha", proposal.alpha},
            {"handle", to_json(proposal.handle)}};
}

inline PushProposal proposal_from_json(const nlohmann::json& j) {
    PushProposal p;
    p.c = vec2_from_json(j.at("c"));
    p.alpha = j.at("alpha").get<double>();
    p.handle = handle_from_json(j.at("handle"));
    return p;
}

}  // namespace singulate
