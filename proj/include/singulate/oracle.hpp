#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "singulate/proposals.hpp"
#include "singulate/scene.hpp"

namespace singulate {

struct LabelCriteria {
    double singulation_threshold = default_singulation_threshold;
    double center_offset_max = 0.35;  ///< fraction of the pushed object's max half-extent
    bool forbid_multi_object_motion = true;
};

/// Per-criterion audit trail; the label is their exact conjunction.
struct LabelBreakdown {
    bool singulated_after = false;        ///< pushed object >= threshold from all others
    bool single_object_motion = false;    ///< at most one object moved
    bool through_center = false;          ///< push line near the mass center
    bool not_already_singulated = false;  ///< pushed object started in clutter
};

struct PushLabel {
    int label = 0;
    int object_id = 0;  ///< pushed object (parent of the handle's segment)
    LabelBreakdown breakdown;
};

namespace detail {

inline const SceneObject& find_object(const Scene& scene, int object_id, const char* where) {
    for (const SceneObject& o : scene.objects)
        if (o.id == object_id) return o;
    throw std::invalid_argument(std::string(where) + ": object " + std::to_string(object_id) +
                                " absent from the scene");
}

}  // namespace detail

/// Distance from the infinite push line to the object's mass center, as a
/// fraction of its max half-extent.
inline double center_offset_fraction(const SceneObject& object, const PushHandle& handle) {
    Vec2 mc = object.world_mass_center();
    double d = std::abs(cross(handle.normal, mc - handle.position));
    double arm = object.max_half_extent();
    if (arm <= 0.0) return 0.0;
    return d / arm;
}

/// Applies the four positive-label criteria to a push outcome: the pushed
/// object ends singulated, at most one object moved, the push line passes
/// near the mass center, and the object was not singulated to begin with.
inline PushLabel label_push(const Scene& before, const Scene& after, const PushOutcome& outcome,
                            const PushHandle& handle, const std::vector<Segment>& segments,
                            const LabelCriteria& criteria = {}) {
    if (criteria.singulation_threshold <= 0.0 || criteria.center_offset_max <= 0.0)
        throw std::invalid_argument("label_push: criteria thresholds must be positive");

    const Segment* seg = nullptr;
    for (const Segment& s : segments)
        if (s.id == handle.segment) seg = &s;
    if (!seg)
        throw std::invalid_argument("label_push: segment " + std::to_string(handle.segment) +
                                    " absent from the segment list");

    PushLabel out;
    out.object_id = seg->parent_object;
    const SceneObject& pushed = detail::find_object(before, out.object_id, "label_push");
    detail::find_object(after, out.object_id, "label_push");

    out.breakdown.singulated_after =
        object_min_distance(after, out.object_id) >= criteria.singulation_threshold;
    out.breakdown.single_object_motion =
        !criteria.forbid_multi_object_motion || outcome.moved_ids.size() <= 1;
    out.breakdown.through_center =
        center_offset_fraction(pushed, handle) <= criteria.center_offset_max;
    out.breakdown.not_already_singulated =
        object_min_distance(before, out.object_id) < criteria.singulation_threshold;

    out.label = (out.breakdown.singulated_after && out.breakdown.single_object_motion &&
                 out.breakdown.through_center && out.breakdown.not_already_singulated)
                    ? 1
                    : 0;
    return out;
}

}  // namespace singulate
