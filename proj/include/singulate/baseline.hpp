#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "singulate/perception.hpp"
#include "singulate/proposals.hpp"

namespace singulate {

inline constexpr double baseline_distance_cap = 0.3;    ///< d_max for f_s normalization, m
inline constexpr double baseline_match_threshold = 0.5;

struct SegmentNode {
    int segment_id = 0;
    Aabb box;
    Vec2 centroid{};
    std::array<double, 4> descriptor{};  ///< extent-scaled canonical principal axes
};

/// Complete graph over segments; edges are pairwise AABB Manhattan gaps.
struct SegmentGraph {
    std::vector<SegmentNode> nodes;
    std::vector<double> edges;  ///< row-major nodes x nodes

    double edge(std::size_t i, std::size_t j) const { return edges[i * nodes.size() + j]; }
};

/// Sum of per-axis gaps; zero when the boxes overlap or touch in both axes.
inline double aabb_manhattan(const Aabb& a, const Aabb& b) {
    double gx = std::max({0.0, b.lo.x - a.hi.x, a.lo.x - b.hi.x});
    double gy = std::max({0.0, b.lo.y - a.hi.y, a.lo.y - b.hi.y});
    return gx + gy;
}

namespace detail {

/// Axes arrive extent-sorted; the eigenvector sign is fixed to the positive-x
/// hemisphere (ties fall to positive y) and scaled by the extent.
inline std::array<double, 4> segment_descriptor(const Segment& seg) {
    std::array<double, 4> d{};
    for (int k = 0; k < 2; ++k) {
        Vec2 a = seg.principal_axes[k];
        if (a.x < 0.0 || (a.x == 0.0 && a.y < 0.0)) a = a * -1.0;
        d[std::size_t(2 * k)] = a.x * seg.extents[k];
        d[std::size_t(2 * k + 1)] = a.y * seg.extents[k];
    }
    return d;
}

inline SegmentNode segment_node(const Segment& seg) {
    SegmentNode node;
    node.segment_id = seg.id;
    node.box = polygon_aabb(seg.polygon);
    node.centroid = seg.centroid;
    node.descriptor = segment_descriptor(seg);
    return node;
}

}  // namespace detail

inline SegmentGraph build_segment_graph(const std::vector<Segment>& segments) {
    SegmentGraph g;
    for (const Segment& s : segments) g.nodes.push_back(detail::segment_node(s));
    std::size_t n = g.nodes.size();
    g.edges.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = aabb_manhattan(g.nodes[i].box, g.nodes[j].box);
            g.edges[i * n + j] = d;
            g.edges[j * n + i] = d;
        }
    return g;
}

/// f_s: translate the handle's AABB by l_a along the push normal, all others
/// static; min Manhattan gap to the rest, clamped to [0,1] by d_max. A scene
/// with no other segment scores 1.
inline double free_space_feature(const SegmentGraph& graph, const PushHandle& handle, double l_a) {
    const SegmentNode* self = nullptr;
    for (const SegmentNode& n : graph.nodes)
        if (n.segment_id == handle.segment) self = &n;
    if (!self)
        throw std::invalid_argument("free_space_feature: segment " +
                                    std::to_string(handle.segment) + " absent from the graph");
    Aabb moved = self->box;
    Vec2 shift = handle.normal * l_a;
    moved.lo = moved.lo + shift;
    moved.hi = moved.hi + shift;

    double raw = std::numeric_limits<double>::infinity();
    for (const SegmentNode& n : graph.nodes)
        if (&n != self) raw = std::min(raw, aabb_manhattan(moved, n.box));
    if (!std::isfinite(raw)) return 1.0;
    return std::clamp(raw / baseline_distance_cap, 0.0, 1.0);
}

/// d = 0.6 * d_pca + 0.4 * d_c, both terms normalized by the table diagonal.
inline double match_distance(const SegmentNode& a, const SegmentNode& b, double diagonal) {
    double d_c = std::min(norm(a.centroid - b.centroid) / diagonal, 1.0);
    double s2 = 0.0;
    for (int k = 0; k < 4; ++k) {
        double d = a.descriptor[std::size_t(k)] - b.descriptor[std::size_t(k)];
        s2 += d * d;
    }
    double d_pca = std::min(std::sqrt(s2) / diagonal, 1.0);
    return 0.6 * d_pca + 0.4 * d_c;
}

struct MatchResult {
    std::vector<int> prev_of_cur;   ///< index into prev, -1 when unmatched
    std::vector<double> distances;  ///< matched pair distance, 0 when fresh
};

/// Greedy minimum-distance matching under the acceptance threshold; each
/// segment participates in at most one pair. Ties break lexicographically.
inline MatchResult match_segments(const std::vector<Segment>& prev,
                                  const std::vector<Segment>& cur, const TableSpec& table) {
    std::vector<SegmentNode> pn, cn;
    for (const Segment& s : prev) pn.push_back(detail::segment_node(s));
    for (const Segment& s : cur) cn.push_back(detail::segment_node(s));

    MatchResult out;
    out.prev_of_cur.assign(cur.size(), -1);
    out.distances.assign(cur.size(), 0.0);
    std::vector<bool> prev_used(prev.size(), false), cur_used(cur.size(), false);

    double diagonal = table.diagonal();
    for (;;) {
        double best = baseline_match_threshold;
        int bp = -1, bc = -1;
        for (std::size_t p = 0; p < pn.size(); ++p) {
            if (prev_used[p]) continue;
            for (std::size_t c = 0; c < cn.size(); ++c) {
                if (cur_used[c]) continue;
                double d = match_distance(pn[p], cn[c], diagonal);
                if (d < best) {
                    best = d;
                    bp = int(p);
                    bc = int(c);
                }
            }
        }
        if (bp < 0) break;
        prev_used[std::size_t(bp)] = true;
        cur_used[std::size_t(bc)] = true;
        out.prev_of_cur[std::size_t(bc)] = bp;
        out.distances[std::size_t(bc)] = best;
    }
    return out;
}

/// Per-segment push history carried across interactions by geometric matching.
struct TrackState {
    std::vector<Segment> segments;  ///< segments as last observed
    std::vector<int> pushes;        ///< r per segment, parallel
    std::vector<int> matched_prev;  ///< previous segment id per track, -1 when fresh
};

inline TrackState advance_tracks(const TrackState& state, const std::vector<Segment>& cur,
                                 const TableSpec& table) {
    MatchResult m = match_segments(state.segments, cur, table);
    TrackState next;
    next.segments = cur;
    next.pushes.assign(cur.size(), 0);
    next.matched_prev.assign(cur.size(), -1);
    for (std::size_t i = 0; i < cur.size(); ++i) {
        int p = m.prev_of_cur[i];
        if (p < 0) continue;
        next.pushes[i] = state.pushes[std::size_t(p)];
        next.matched_prev[i] = state.segments[std::size_t(p)].id;
    }
    return next;
}

inline void record_push(TrackState& state, int segment_id) {
    for (std::size_t i = 0; i < state.segments.size(); ++i)
        if (state.segments[i].id == segment_id) {
            ++state.pushes[i];
            return;
        }
    throw std::invalid_argument("record_push: segment " + std::to_string(segment_id) +
                                " absent from the track state");
}

inline int pushes_for(const TrackState& state, int segment_id) {
    for (std::size_t i = 0; i < state.segments.size(); ++i)
        if (state.segments[i].id == segment_id) return state.pushes[i];
    return 0;
}

inline double history_feature(int r) {
    if (r < 0) throw std::invalid_argument("history_feature: negative push count");
    return std::exp(-double(r));
}

struct ScoreBreakdown {
    double f_s = 0.0;
    double f_h = 1.0;
    int r = 0;
    int matched_prev = -1;
    double score = 0.0;
};

/// p = 0.5 * f_s + 0.5 * f_h.
inline ScoreBreakdown baseline_score(const SegmentGraph& graph, const TrackState& tracks,
                                     const PushHandle& handle) {
    ScoreBreakdown b;
    b.f_s = free_space_feature(graph, handle, handle.length);
    b.r = pushes_for(tracks, handle.segment);
    for (std::size_t i = 0; i < tracks.segments.size(); ++i)
        if (tracks.segments[i].id == handle.segment) b.matched_prev = tracks.matched_prev[i];
    b.f_h = history_feature(b.r);
    b.score = 0.5 * b.f_s + 0.5 * b.f_h;
    return b;
}

}  // namespace singulate
