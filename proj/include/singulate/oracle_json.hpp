#pragma once

#include <nlohmann/json.hpp>

#include "singulate/oracle.hpp"

namespace singulate {

inline nlohmann::json to_json(const PushLabel& label) {
    return {{"label", label.label},
            {"object", label.object_id},
            {"singulated_after", label.breakdown.singulated_after},
            {"single_object_motion", label.breakdown.single_object_motion},
            {"through_center", label.breakdown.through_center},
            {"not_already_singulated", label.breakdown.not_already_singulated}};
}

}  // namespace singulate
