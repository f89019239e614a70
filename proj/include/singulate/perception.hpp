#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "singulate/geometry.hpp"
#include "singulate/rng.hpp"
#include "singulate/scene.hpp"

namespace singulate {

/// One surface patch of the over-segmented observation.
struct Segment {
    int id = 0;
    int parent_object = 0;
    Polygon polygon;  ///< convex, world frame
    Vec2 centroid{};
    std::array<Vec2, 2> principal_axes{};
    std::array<double, 2> extents{};
};

inline Segment make_segment(int id, int parent_object, Polygon polygon) {
    Segment seg;
    seg.id = id;
    seg.parent_object = parent_object;
    PolygonMoments m = polygon_moments(polygon);
    if (m.area <= 1e-8) throw std::invalid_argument("make_segment: degenerate polygon");
    seg.polygon = std::move(polygon);
    seg.centroid = m.centroid;
    seg.principal_axes = m.axes;
    seg.extents = m.extents;
    return seg;
}

/// Orthographic world-to-pixel mapping. Integer pixel coordinates address
/// pixel centers; the mapping is affine and orientation preserving (world +y
/// grows with the row index).
struct ViewTransform {
    double scale = 320.0;  ///< pixels per meter
    int height = 256;
    int width = 320;
    Vec2 world_origin_pixel{-0.5, -0.5};
};

inline Vec2 world_to_image(const ViewTransform& view, Vec2 w) {
    return view.world_origin_pixel + w * view.scale;
}

inline Vec2 image_to_world(const ViewTransform& view, Vec2 p) {
    return (p - view.world_origin_pixel) * (1.0 / view.scale);
}

inline bool pixel_in_bounds(const ViewTransform& view, Vec2 p) {
    return p.x >= -0.5 && p.x <= view.width - 0.5 && p.y >= -0.5 && p.y <= view.height - 0.5;
}

/// Smallest view at the given scale that covers the whole table.
inline ViewTransform fit_view(const TableSpec& table, double scale = 320.0) {
    if (scale <= 0.0) throw std::invalid_argument("fit_view: scale must be positive");
    ViewTransform view;
    view.scale = scale;
    view.width = static_cast<int>(std::ceil(table.width * scale));
    view.height = static_cast<int>(std::ceil(table.height * scale));
    view.world_origin_pixel = {-0.5 - table.origin.x * scale, -0.5 - table.origin.y * scale};
    return view;
}

struct ObservationImage {
    ViewTransform view;
    std::vector<float> pixels;            ///< row-major, [0,1], background 0
    std::vector<std::int32_t> segment_ids;  ///< row-major, -1 for background

    int width() const { return view.width; }
    int height() const { return view.height; }
    float pixel_at(int ix, int iy) const { return pixels[std::size_t(iy) * view.width + ix]; }
    std::int32_t segment_at(int ix, int iy) const {
        return segment_ids[std::size_t(iy) * view.width + ix];
    }
};

/// Identity-coding gray value for segment `index` of `count`, uniformly
/// spaced in (0.3, 1.0].
inline float gray_level(std::size_t index, std::size_t count) {
    return static_cast<float>(0.3 + 0.7 * (double(index) + 1.0) / double(count));
}

namespace detail {

/// Drop duplicate and collinear vertices left behind by clipping.
inline Polygon simplify_polygon(const Polygon& poly) {
    Polygon dedup;
    for (Vec2 v : poly)
        if (dedup.empty() || norm(v - dedup.back()) > 1e-12) dedup.push_back(v);
    while (dedup.size() >= 2 && norm(dedup.front() - dedup.back()) <= 1e-12) dedup.pop_back();
    if (dedup.size() < 3) return dedup;
    Polygon out;
    std::size_t n = dedup.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = dedup[(i + n - 1) % n], b = dedup[i], c = dedup[(i + 1) % n];
        if (std::abs(cross(b - a, c - b)) > 1e-14) out.push_back(b);
    }
    return out;
}

/// Cut a convex polygon along a random chord; both pieces keep at least 15%
/// of the area so splits stay visually meaningful.
inline std::optional<std::pair<Polygon, Polygon>> split_polygon(const Polygon& poly, Rng& rng) {
    PolygonMoments m = polygon_moments(poly);
    for (int attempt = 0; attempt < 20; ++attempt) {
        double psi = rng.uniform(0.0, M_PI);
        Vec2 dir{std::cos(psi), std::sin(psi)};
        Vec2 through = m.centroid + m.axes[0] * (rng.uniform(-0.5, 0.5) * m.extents[0]) +
                       m.axes[1] * (rng.uniform(-0.5, 0.5) * m.extents[1]);
        Polygon left = simplify_polygon(clip_left_of(poly, through, through + dir));
        Polygon right = simplify_polygon(clip_left_of(poly, through + dir, through));
        if (left.size() < 3 || right.size() < 3) continue;
        double la = std::abs(polygon_area(left)), ra = std::abs(polygon_area(right));
        if (la < 0.15 * m.area || ra < 0.15 * m.area) continue;
        return std::make_pair(std::move(left), std::move(right));
    }
    return std::nullopt;
}

}  // namespace detail

/// Synthetic over-segmentation: each object maps to one segment, or with
/// probability split_prob to 2-3 chord-split pieces. Draw order is fixed, so
/// results are reproducible per seed independent of split outcomes.
inline std::vector<Segment> over_segment(const Scene& scene, std::uint64_t noise_seed,
                                         double split_prob) {
    if (split_prob < 0.0 || split_prob > 1.0)
        throw std::invalid_argument("over_segment: split_prob must be in [0,1]");
    Rng rng(derive_seed(noise_seed, 0x5E6));
    std::vector<Segment> out;
    for (const auto& obj : scene.objects) {
        std::vector<Polygon> pieces{obj.world_polygon()};
        bool split = rng.bernoulli(split_prob);
        int target = 2 + static_cast<int>(rng.uniform_index(2));
        if (split) {
            while (static_cast<int>(pieces.size()) < target) {
                std::size_t largest = 0;
                for (std::size_t i = 1; i < pieces.size(); ++i)
                    if (std::abs(polygon_area(pieces[i])) > std::abs(polygon_area(pieces[largest])))
                        largest = i;
                auto cut = detail::split_polygon(pieces[largest], rng);
                if (!cut) break;
                pieces[largest] = std::move(cut->first);
                pieces.push_back(std::move(cut->second));
            }
        }
        for (auto& piece : pieces)
            out.push_back(make_segment(static_cast<int>(out.size()), obj.id, std::move(piece)));
    }
    return out;
}

namespace detail {

/// +1 if the unit pixel square at (cx,cy) lies inside the CCW polygon, -1 if
/// fully outside, 0 if an edge crosses it.
inline int pixel_square_class(const Polygon& pix, double cx, double cy) {
    int cls = 1;
    for (std::size_t i = 0, n = pix.size(); i < n; ++i) {
        Vec2 a = pix[i], b = pix[(i + 1) % n];
        double ex = b.x - a.x, ey = b.y - a.y;
        double cr = ex * (cy - a.y) - ey * (cx - a.x);
        double margin = 0.5 * (std::abs(ex) + std::abs(ey));
        if (cr < -margin) return -1;
        if (cr < margin) cls = 0;
    }
    return cls;
}

/// Covered fraction of the unit square [-0.5,0.5]^2 for a convex CCW polygon
/// given in pixel-local coordinates. poly and scratch are clobbered.
inline double unit_square_coverage(Polygon& poly, Polygon& scratch) {
    auto clip = [](const Polygon& in, Polygon& out, bool on_x, double bound, double sign) {
        out.clear();
        std::size_t n = in.size();
        for (std::size_t i = 0; i < n; ++i) {
            Vec2 a = in[i], b = in[(i + 1) % n];
            double da = sign * (on_x ? a.x : a.y) - bound;
            double db = sign * (on_x ? b.x : b.y) - bound;
            if (da <= 0.0) out.push_back(a);
            if ((da <= 0.0) != (db <= 0.0)) {
                double t = da / (da - db);
                out.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
            }
        }
    };
    clip(poly, scratch, true, 0.5, 1.0);
    if (scratch.size() < 3) return 0.0;
    clip(scratch, poly, true, 0.5, -1.0);
    if (poly.size() < 3) return 0.0;
    clip(poly, scratch, false, 0.5, 1.0);
    if (scratch.size() < 3) return 0.0;
    clip(scratch, poly, false, 0.5, -1.0);
    if (poly.size() < 3) return 0.0;
    return std::abs(polygon_area(poly));
}

/// Separable Gaussian with sigma 1 px, radius 3, zero padding. Keeps the
/// raster band-limited enough that resampling under rotation stays
/// consistent; a uniform 7x7 patch maps to its own value.
inline void soften_edges(std::vector<float>& pixels, int width, int height) {
    constexpr int radius = 3;
    static const std::array<double, 2 * radius + 1> taps = [] {
        std::array<double, 2 * radius + 1> t{};
        double sum = 0.0;
        for (int k = -radius; k <= radius; ++k)
            sum += t[k + radius] = std::exp(-double(k * k) / 2.0);
        for (double& v : t) v /= sum;
        return t;
    }();

    std::vector<float> tmp(pixels.size());
    for (int y = 0; y < height; ++y) {
        std::size_t row = std::size_t(y) * width;
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int xs = x + k;
                if (xs >= 0 && xs < width) acc += taps[k + radius] * pixels[row + xs];
            }
            tmp[row + x] = static_cast<float>(acc);
        }
    }
    for (int y = 0; y < height; ++y) {
        std::size_t row = std::size_t(y) * width;
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int ys = y + k;
                if (ys >= 0 && ys < height) acc += taps[k + radius] * tmp[std::size_t(ys) * width + x];
            }
            pixels[row + x] = static_cast<float>(acc);
        }
    }
}

}  // namespace detail

/// Rasterize segments into a gray-coded observation. Pixel centers decide
/// segment ids; intensity is exact footprint coverage softened by a small
/// isotropic blur, so pixels near a boundary carry fractional gray. Later
/// segments take precedence in both.
inline ObservationImage render(const Scene& scene, const std::vector<Segment>& segments,
                               const ViewTransform& view) {
    Vec2 c0 = world_to_image(view, scene.table.origin);
    Vec2 c1 = world_to_image(view, scene.table.origin + Vec2{scene.table.width, scene.table.height});
    if (!pixel_in_bounds(view, c0) || !pixel_in_bounds(view, c1))
        throw std::invalid_argument("render: view does not cover the table");

    ObservationImage obs;
    obs.view = view;
    obs.pixels.assign(std::size_t(view.height) * view.width, 0.0f);
    obs.segment_ids.assign(std::size_t(view.height) * view.width, -1);

    std::vector<Polygon> pix_polys(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        pix_polys[i].reserve(segments[i].polygon.size());
        for (Vec2 v : segments[i].polygon) pix_polys[i].push_back(world_to_image(view, v));
        const Polygon& pix = pix_polys[i];
        Aabb box = polygon_aabb(pix);
        int x0 = std::max(0, static_cast<int>(std::ceil(box.lo.x)));
        int x1 = std::min(view.width - 1, static_cast<int>(std::floor(box.hi.x)));
        int y0 = std::max(0, static_cast<int>(std::ceil(box.lo.y)));
        int y1 = std::min(view.height - 1, static_cast<int>(std::floor(box.hi.y)));
        for (int iy = y0; iy <= y1; ++iy) {
            std::size_t row = std::size_t(iy) * view.width;
            for (int ix = x0; ix <= x1; ++ix)
                if (convex_contains(pix, {double(ix), double(iy)}))
                    obs.segment_ids[row + ix] = segments[i].id;
        }
    }

    // intensity in reverse draw order: each segment claims its coverage out
    // of what later segments left unclaimed, which matches per-area painter
    // semantics because distinct segments only overlap in boundary slivers
    std::vector<float> remaining(obs.pixels.size(), 1.0f);
    Polygon local, scratch;
    for (std::size_t i = segments.size(); i-- > 0;) {
        double level = gray_level(i, segments.size());
        const Polygon& pix = pix_polys[i];
        Aabb box = polygon_aabb(pix);
        int x0 = std::max(0, static_cast<int>(std::ceil(box.lo.x - 0.5)));
        int x1 = std::min(view.width - 1, static_cast<int>(std::floor(box.hi.x + 0.5)));
        int y0 = std::max(0, static_cast<int>(std::ceil(box.lo.y - 0.5)));
        int y1 = std::min(view.height - 1, static_cast<int>(std::floor(box.hi.y + 0.5)));
        for (int iy = y0; iy <= y1; ++iy) {
            std::size_t row = std::size_t(iy) * view.width;
            for (int ix = x0; ix <= x1; ++ix) {
                float& rem = remaining[row + ix];
                if (rem <= 0.0f) continue;
                int cls = detail::pixel_square_class(pix, double(ix), double(iy));
                if (cls < 0) continue;
                double cov = 1.0;
                if (cls == 0) {
                    local.clear();
                    for (Vec2 v : pix) local.push_back({v.x - ix, v.y - iy});
                    cov = detail::unit_square_coverage(local, scratch);
                    if (cov <= 0.0) continue;
                }
                double take = std::min(cov, double(rem));
                obs.pixels[row + ix] += static_cast<float>(level * take);
                rem -= static_cast<float>(take);
            }
        }
    }

    detail::soften_edges(obs.pixels, view.width, view.height);
    return obs;
}

}  // namespace singulate
