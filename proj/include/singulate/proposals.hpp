#pragma once

#include <vector>

#include "singulate/perception.hpp"
#include "singulate/scene.hpp"

namespace singulate {

/// Candidate push: start on a segment boundary, direction facing into it.
struct PushHandle {
    Vec2 position{};  ///< world, on the segment boundary
    Vec2 normal{};    ///< unit inward normal of the boundary edge (push direction)
    int segment = 0;
    double length = 0.2;  ///< push travel l_a, meters

    Vec2 endpoint() const { return position + normal * length; }
};

inline PushCommand to_push_command(const PushHandle& handle) {
    return {handle.position, handle.normal, handle.length};
}

/// Image-space lift of a handle. alpha is the push angle in the displayed
/// image frame, whose y axis points down; world +y maps to alpha = -pi/2.
struct PushProposal {
    Vec2 c{};            ///< pixel coordinates of the push start
    double alpha = 0.0;  ///< radians in [-pi, pi)
    PushHandle handle;
};

struct ProposalSet {
    std::vector<PushProposal> proposals;
    int n_excluded = 0;  ///< handles whose pixel mapping fell outside the image
};

inline double push_angle(Vec2 normal) { return wrap_angle(std::atan2(-normal.y, normal.x)); }

/// Unit world direction for a push angle (inverse of push_angle).
inline Vec2 push_direction(double alpha) { return {std::cos(alpha), -std::sin(alpha)}; }

/// Arc-length uniform boundary samples with inward edge normals. Handles
/// whose start or push endpoint leaves the table are dropped; the RNG draw
/// count per segment is fixed, so filtering never shifts later draws.
inline std::vector<PushHandle> sample_handles(const std::vector<Segment>& segments,
                                              const TableSpec& table, int per_segment,
                                              std::uint64_t seed, double push_length = 0.2) {
    if (per_segment < 1) throw std::invalid_argument("sample_handles: per_segment must be >= 1");
    if (push_length <= 0.0) throw std::invalid_argument("sample_handles: push_length must be > 0");

    Rng rng(derive_seed(seed, 0x4A9D1E));
    std::vector<PushHandle> out;
    for (const auto& seg : segments) {
        const Polygon& poly = seg.polygon;
        std::size_t n = poly.size();
        double perim = 0.0;
        for (std::size_t i = 0; i < n; ++i) perim += norm(poly[(i + 1) % n] - poly[i]);

        for (int k = 0; k < per_segment; ++k) {
            double s = rng.uniform(0.0, perim);
            std::size_t edge = 0;
            double edge_len = norm(poly[1 % n] - poly[0]);
            while (s > edge_len && edge + 1 < n) {
                s -= edge_len;
                ++edge;
                edge_len = norm(poly[(edge + 1) % n] - poly[edge]);
            }
            Vec2 a = poly[edge], b = poly[(edge + 1) % n];
            Vec2 dir = (b - a) * (1.0 / edge_len);
            PushHandle handle;
            handle.position = a + dir * std::min(s, edge_len);
            handle.normal = {-dir.y, dir.x};  // inward for CCW boundary
            handle.segment = seg.id;
            handle.length = push_length;
            if (!table.contains(handle.position)) continue;
            if (!table.contains(handle.endpoint())) continue;
            out.push_back(handle);
        }
    }
    return out;
}

/// Lift handles into image space; handles mapping outside the working image
/// are excluded and counted.
inline ProposalSet to_proposals(const std::vector<PushHandle>& handles,
                                const ViewTransform& view) {
    ProposalSet set;
    for (const auto& handle : handles) {
        Vec2 c = world_to_image(view, handle.position);
        if (!pixel_in_bounds(view, c)) {
            ++set.n_excluded;
            continue;
        }
        set.proposals.push_back({c, push_angle(handle.normal), handle});
    }
    return set;
}

}  // namespace singulate
