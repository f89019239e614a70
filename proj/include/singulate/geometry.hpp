#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace singulate {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double norm2(Vec2 v) { return v.x * v.x + v.y * v.y; }
inline Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

inline Vec2 normalized(Vec2 v) {
    double n = norm(v);
    if (n <= 0.0) throw std::invalid_argument("normalized: zero vector");
    return {v.x / n, v.y / n};
}

inline Vec2 rotate(Vec2 v, double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// 2D rigid transform: rotation by theta followed by translation.
struct Pose2 {
    Vec2 t{};
    double theta = 0.0;

    Vec2 apply(Vec2 p) const { return rotate(p, theta) + t; }
    Vec2 apply_inverse(Vec2 p) const { return rotate(p - t, -theta); }
    bool operator==(const Pose2&) const = default;
};

/// Rotate a pose about a fixed world-frame pivot.
inline Pose2 rotate_about(const Pose2& pose, Vec2 pivot, double phi) {
    Pose2 out;
    out.theta = pose.theta + phi;
    out.t = rotate(pose.t - pivot, phi) + pivot;
    return out;
}

using Polygon = std::vector<Vec2>;

inline Polygon transform(const Polygon& poly, const Pose2& pose) {
    Polygon out;
    out.reserve(poly.size());
    for (Vec2 v : poly) out.push_back(pose.apply(v));
    return out;
}

inline double polygon_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i)
        a += cross(poly[i], poly[(i + 1) % n]);
    return 0.5 * a;
}

inline Vec2 polygon_centroid(const Polygon& poly) {
    double a = 0.0;
    Vec2 c{};
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        double w = cross(poly[i], poly[(i + 1) % n]);
        a += w;
        c += (poly[i] + poly[(i + 1) % n]) * w;
    }
    if (std::abs(a) < 1e-30) throw std::invalid_argument("polygon_centroid: degenerate polygon");
    return c * (1.0 / (3.0 * a));
}

/// Strictly convex, counter-clockwise, no repeated vertices.
inline bool is_convex_ccw(const Polygon& poly, double eps = 1e-12) {
    std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 a = poly[i], b = poly[(i + 1) % n], c = poly[(i + 2) % n];
        if (cross(b - a, c - b) <= eps) return false;
    }
    return true;
}

/// Inclusive containment test for convex CCW polygons.
inline bool convex_contains(const Polygon& poly, Vec2 p, double eps = 1e-12) {
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        Vec2 a = poly[i], b = poly[(i + 1) % n];
        if (cross(b - a, p - a) < -eps) return false;
    }
    return true;
}

/// Strict interior test (boundary points excluded).
inline bool convex_contains_strict(const Polygon& poly, Vec2 p, double eps = 1e-12) {
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        Vec2 a = poly[i], b = poly[(i + 1) % n];
        if (cross(b - a, p - a) <= eps) return false;
    }
    return true;
}

inline Vec2 closest_point_on_segment(Vec2 a, Vec2 b, Vec2 p) {
    Vec2 ab = b - a;
    double len2 = norm2(ab);
    if (len2 <= 0.0) return a;
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    return norm(p - closest_point_on_segment(a, b, p));
}

/// Closest pair of points between segments [p1,q1] and [p2,q2]
/// (clamped quadratic minimization, Ericson 5.1.9).
inline double segment_segment_distance(Vec2 p1, Vec2 q1, Vec2 p2, Vec2 q2) {
    Vec2 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    double a = norm2(d1), e = norm2(d2), f = dot(d2, r);
    double s = 0.0, t = 0.0;
    if (a <= 0.0 && e <= 0.0) return norm(r);
    if (a <= 0.0) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        double c = dot(d1, r);
        if (e <= 0.0) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            double b = dot(d1, d2);
            double denom = a * e - b * b;
            if (denom > 0.0) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    Vec2 c1 = p1 + d1 * s, c2 = p2 + d2 * t;
    return norm(c1 - c2);
}

/// Closest point on the polygon boundary to p, with its edge index.
struct BoundaryPoint {
    Vec2 point{};
    std::size_t edge = 0;
    double distance = 0.0;
};

inline BoundaryPoint closest_boundary_point(const Polygon& poly, Vec2 p) {
    BoundaryPoint best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        Vec2 q = closest_point_on_segment(poly[i], poly[(i + 1) % n], p);
        double d = norm(p - q);
        if (d < best.distance) best = {q, i, d};
    }
    return best;
}

struct SatResult {
    bool overlap = false;
    double depth = 0.0;  ///< translation distance along axis that separates (valid when overlap)
    Vec2 axis{};         ///< unit vector; translating B by depth·axis resolves the penetration
};

/// Separating-axis test for two convex polygons. On overlap, (axis, depth)
/// is the minimum translation of B that separates the pair; for shallow
/// contacts the axis points from A toward B. Touching (zero-width projection
/// overlap) counts as contact, not penetration.
inline SatResult sat_penetration(const Polygon& a, const Polygon& b) {
    SatResult res;
    res.overlap = true;
    res.depth = std::numeric_limits<double>::infinity();

    auto run = [&](const Polygon& src) {
        for (std::size_t i = 0, n = src.size(); i < n; ++i) {
            Vec2 edge = src[(i + 1) % n] - src[i];
            double len = norm(edge);
            if (len <= 0.0) continue;
            Vec2 axis{edge.y / len, -edge.x / len};
            double min_a = std::numeric_limits<double>::infinity(), max_a = -min_a;
            for (Vec2 v : a) {
                double d = dot(axis, v);
                min_a = std::min(min_a, d);
                max_a = std::max(max_a, d);
            }
            double min_b = std::numeric_limits<double>::infinity(), max_b = -min_b;
            for (Vec2 v : b) {
                double d = dot(axis, v);
                min_b = std::min(min_b, d);
                max_b = std::max(max_b, d);
            }
            // cost of sliding B's interval out on either side; handles the
            // contained-interval case where intersection length underestimates
            double t_up = max_a - min_b;
            double t_down = max_b - min_a;
            if (t_up <= 0.0 || t_down <= 0.0) {
                res.overlap = false;
                return;
            }
            double t = std::min(t_up, t_down);
            if (t < res.depth) {
                res.depth = t;
                res.axis = (t_up <= t_down) ? axis : -axis;
            }
        }
    };
    run(a);
    if (res.overlap) run(b);
    return res;
}

/// Euclidean distance between convex polygon boundaries; 0 when they
/// overlap or touch.
inline double convex_distance(const Polygon& a, const Polygon& b) {
    if (sat_penetration(a, b).overlap) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = a.size(); i < n; ++i)
        for (std::size_t j = 0, m = b.size(); j < m; ++j)
            best = std::min(best, segment_segment_distance(a[i], a[(i + 1) % n],
                                                           b[j], b[(j + 1) % m]));
    return best;
}

/// Clip a convex polygon, keeping the points on the left of the directed
/// line a -> b (one Sutherland-Hodgman step).
inline Polygon clip_left_of(const Polygon& poly, Vec2 a, Vec2 b) {
    Polygon out;
    Vec2 dir = b - a;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 cur = poly[i], nxt = poly[(i + 1) % n];
        double dc = cross(dir, cur - a);
        double dn = cross(dir, nxt - a);
        if (dc >= 0.0) out.push_back(cur);
        if ((dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0)) {
            double t = dc / (dc - dn);
            out.push_back(cur + (nxt - cur) * t);
        }
    }
    return out;
}

/// Area of the intersection of two convex polygons (CCW).
inline double convex_intersection_area(const Polygon& a, const Polygon& b) {
    Polygon clipped = a;
    for (std::size_t i = 0, n = b.size(); i < n && clipped.size() >= 3; ++i)
        clipped = clip_left_of(clipped, b[i], b[(i + 1) % n]);
    if (clipped.size() < 3) return 0.0;
    return std::abs(polygon_area(clipped));
}

struct Aabb {
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

    void expand(Vec2 p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y; }
};

inline Aabb polygon_aabb(const Polygon& poly) {
    Aabb box;
    for (Vec2 v : poly) box.expand(v);
    return box;
}

/// Area-weighted second-moment summary of a polygon.
struct PolygonMoments {
    double area = 0.0;
    Vec2 centroid{};
    std::array<Vec2, 2> axes{};     ///< orthonormal, sorted by extent (descending)
    std::array<double, 2> extents{};  ///< sqrt of covariance eigenvalues, meters
};

inline PolygonMoments polygon_moments(const Polygon& poly) {
    double a2 = 0.0;  // 2 * signed area
    double cx = 0.0, cy = 0.0;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 p = poly[i], q = poly[(i + 1) % n];
        double w = cross(p, q);
        a2 += w;
        cx += w * (p.x + q.x);
        cy += w * (p.y + q.y);
        sxx += w * (p.x * p.x + p.x * q.x + q.x * q.x);
        sxy += w * (2.0 * p.x * p.y + p.x * q.y + q.x * p.y + 2.0 * q.x * q.y);
        syy += w * (p.y * p.y + p.y * q.y + q.y * q.y);
    }
    double area = 0.5 * a2;
    if (std::abs(area) < 1e-30) throw std::invalid_argument("polygon_moments: degenerate polygon");
    PolygonMoments m;
    m.area = std::abs(area);
    m.centroid = {cx / (3.0 * a2), cy / (3.0 * a2)};
    // raw second moments about the origin, normalized by area
    double exx = sxx / (6.0 * a2);
    double exy = sxy / (12.0 * a2);
    double eyy = syy / (6.0 * a2);
    // covariance about the centroid
    double cxx = exx - m.centroid.x * m.centroid.x;
    double cvxy = exy - m.centroid.x * m.centroid.y;
    double cyy = eyy - m.centroid.y * m.centroid.y;

    double tr = 0.5 * (cxx + cyy);
    double det = std::sqrt(std::max(0.0, 0.25 * (cxx - cyy) * (cxx - cyy) + cvxy * cvxy));
    double l1 = tr + det, l2 = std::max(0.0, tr - det);
    double theta = 0.5 * std::atan2(2.0 * cvxy, cxx - cyy);
    Vec2 v1{std::cos(theta), std::sin(theta)};
    // atan2 form aims v1 at the larger eigenvalue; verify and swap if needed
    double q1 = cxx * v1.x * v1.x + 2.0 * cvxy * v1.x * v1.y + cyy * v1.y * v1.y;
    Vec2 v2 = perp(v1);
    double q2 = cxx * v2.x * v2.x + 2.0 * cvxy * v2.x * v2.y + cyy * v2.y * v2.y;
    if (q2 > q1) std::swap(v1, v2);

    auto canonical = [](Vec2 v) {
        if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) return -v;
        return v;
    };
    m.axes = {canonical(v1), canonical(v2)};
    m.extents = {std::sqrt(l1), std::sqrt(l2)};
    return m;
}

inline double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

}  // namespace singulate
