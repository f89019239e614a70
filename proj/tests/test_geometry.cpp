#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "singulate/geometry.hpp"
#include "singulate/rng.hpp"

using namespace singulate;

namespace {

Polygon unit_square() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

/// Ellipse-scaled regular k-gon under a rigid transform; always convex CCW.
Polygon random_convex(Rng& rng, Vec2 center) {
    int k = 3 + static_cast<int>(rng.uniform_index(6));
    double sx = rng.uniform(0.02, 0.08);
    double sy = rng.uniform(0.02, 0.08);
    double alpha = rng.uniform(0.0, 2.0 * M_PI);
    Polygon poly;
    for (int i = 0; i < k; ++i) {
        double ang = 2.0 * M_PI * i / k;
        Vec2 v{sx * std::cos(ang), sy * std::sin(ang)};
        poly.push_back(rotate(v, alpha) + center);
    }
    REQUIRE(is_convex_ccw(poly));
    return poly;
}

double polygon_perimeter(const Polygon& poly) {
    double p = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i)
        p += norm(poly[(i + 1) % n] - poly[i]);
    return p;
}

/// Equally spaced points along the polygon boundary (arc length).
std::vector<Vec2> sample_boundary(const Polygon& poly, int count) {
    double perim = polygon_perimeter(poly);
    std::vector<Vec2> pts;
    pts.reserve(count);
    std::size_t n = poly.size();
    std::size_t edge = 0;
    double into_edge = 0.0;
    double step = perim / count;
    double edge_len = norm(poly[1 % n] - poly[0]);
    for (int i = 0; i < count; ++i) {
        while (into_edge > edge_len) {
            into_edge -= edge_len;
            edge = (edge + 1) % n;
            edge_len = norm(poly[(edge + 1) % n] - poly[edge]);
        }
        Vec2 a = poly[edge], b = poly[(edge + 1) % n];
        pts.push_back(a + (b - a) * (into_edge / edge_len));
        into_edge += step;
    }
    return pts;
}

}  // namespace

TEST_CASE("Vec2 and Pose2 basics") {
    Vec2 v = rotate({1, 0}, M_PI / 2);
    CHECK(v.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(v.y == Catch::Approx(1.0));

    CHECK(dot({1, 2}, {3, 4}) == 11.0);
    CHECK(cross({1, 0}, {0, 1}) == 1.0);
    CHECK(norm(Vec2{3, 4}) == Catch::Approx(5.0));
    CHECK(perp(Vec2{1, 0}) == Vec2{0, 1});

    Pose2 pose{{0.3, -0.2}, 0.9};
    Vec2 p{0.11, 0.07};
    Vec2 rt = pose.apply_inverse(pose.apply(p));
    CHECK(rt.x == Catch::Approx(p.x).margin(1e-14));
    CHECK(rt.y == Catch::Approx(p.y).margin(1e-14));

    // rotating about the transformed point keeps it fixed
    Vec2 pivot = pose.apply(p);
    Pose2 spun = rotate_about(pose, pivot, 1.3);
    Vec2 still = spun.apply(p);
    CHECK(still.x == Catch::Approx(pivot.x).margin(1e-14));
    CHECK(still.y == Catch::Approx(pivot.y).margin(1e-14));
    CHECK(spun.theta == Catch::Approx(pose.theta + 1.3));
}

TEST_CASE("polygon area and centroid") {
    CHECK(polygon_area(unit_square()) == Catch::Approx(1.0));
    CHECK(polygon_centroid(unit_square()).x == Catch::Approx(0.5));
    CHECK(polygon_centroid(unit_square()).y == Catch::Approx(0.5));

    Polygon tri{{0, 0}, {3, 0}, {0, 3}};
    CHECK(polygon_area(tri) == Catch::Approx(4.5));
    CHECK(polygon_centroid(tri).x == Catch::Approx(1.0));
    CHECK(polygon_centroid(tri).y == Catch::Approx(1.0));

    Polygon cw{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    CHECK(polygon_area(cw) == Catch::Approx(-1.0));
}

TEST_CASE("is_convex_ccw classifies orientation and convexity") {
    CHECK(is_convex_ccw(unit_square()));
    Polygon cw{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    CHECK_FALSE(is_convex_ccw(cw));
    Polygon dart{{0, 0}, {2, 0}, {0.5, 0.5}, {0, 2}};
    CHECK_FALSE(is_convex_ccw(dart));
    CHECK_FALSE(is_convex_ccw({{0, 0}, {1, 0}}));
}

TEST_CASE("convex containment, inclusive and strict") {
    Polygon sq = unit_square();
    CHECK(convex_contains(sq, {0.5, 0.5}));
    CHECK(convex_contains(sq, {0.0, 0.5}));
    CHECK(convex_contains(sq, {1.0, 1.0}));
    CHECK_FALSE(convex_contains(sq, {1.1, 0.5}));
    CHECK_FALSE(convex_contains(sq, {-0.01, 0.5}));

    CHECK(convex_contains_strict(sq, {0.5, 0.5}, 0.0));
    CHECK_FALSE(convex_contains_strict(sq, {0.0, 0.5}, 0.0));
    CHECK_FALSE(convex_contains_strict(sq, {1.0, 1.0}, 0.0));
}

TEST_CASE("point to segment distance") {
    CHECK(point_segment_distance({0, 1}, {-1, 0}, {1, 0}) == Catch::Approx(1.0));
    CHECK(point_segment_distance({2, 0}, {-1, 0}, {1, 0}) == Catch::Approx(1.0));
    CHECK(point_segment_distance({0.5, 0}, {-1, 0}, {1, 0}) == Catch::Approx(0.0).margin(1e-15));
    CHECK(point_segment_distance({3, 4}, {0, 0}, {0, 0}) == Catch::Approx(5.0));
}

TEST_CASE("segment to segment distance, hand cases") {
    // parallel, vertically offset
    CHECK(segment_segment_distance({0, 0}, {1, 0}, {0, 0.5}, {1, 0.5}) == Catch::Approx(0.5));
    // collinear, disjoint
    CHECK(segment_segment_distance({0, 0}, {1, 0}, {2, 0}, {3, 0}) == Catch::Approx(1.0));
    // crossing
    CHECK(segment_segment_distance({-1, -1}, {1, 1}, {-1, 1}, {1, -1}) ==
          Catch::Approx(0.0).margin(1e-15));
    // endpoint to interior
    CHECK(segment_segment_distance({0, 1}, {0, 2}, {-1, 0}, {1, 0}) == Catch::Approx(1.0));
}

TEST_CASE("segment to segment distance agrees with dense sampling") {
    Rng rng(2024);
    const int grid = 256;
    for (int trial = 0; trial < 100; ++trial) {
        Vec2 p1{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec2 q1{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec2 p2{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec2 q2{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double d = segment_segment_distance(p1, q1, p2, q2);

        double sampled = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= grid; ++i) {
            Vec2 a = p1 + (q1 - p1) * (double(i) / grid);
            for (int j = 0; j <= grid; ++j) {
                Vec2 b = p2 + (q2 - p2) * (double(j) / grid);
                sampled = std::min(sampled, norm(a - b));
            }
        }
        double tol = (norm(q1 - p1) + norm(q2 - p2)) / grid + 1e-12;
        REQUIRE(d <= sampled + 1e-12);
        REQUIRE(d >= sampled - tol);
    }
}

TEST_CASE("closest boundary point on a square") {
    Polygon sq = unit_square();
    BoundaryPoint bp = closest_boundary_point(sq, {0.3, 0.5});
    CHECK(bp.distance == Catch::Approx(0.3));
    CHECK(bp.point.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(bp.point.y == Catch::Approx(0.5));
    CHECK(bp.edge == 3);

    BoundaryPoint outside = closest_boundary_point(sq, {2.0, 0.5});
    CHECK(outside.distance == Catch::Approx(1.0));
    CHECK(outside.point.x == Catch::Approx(1.0));
}

TEST_CASE("sat_penetration on axis-aligned squares") {
    Polygon a = unit_square();
    Polygon b{{0.9, 0}, {1.9, 0}, {1.9, 1}, {0.9, 1}};
    SatResult res = sat_penetration(a, b);
    REQUIRE(res.overlap);
    CHECK(res.depth == Catch::Approx(0.1));
    CHECK(res.axis.x == Catch::Approx(1.0));
    CHECK(res.axis.y == Catch::Approx(0.0).margin(1e-15));

    Polygon touching{{1.0, 0}, {2, 0}, {2, 1}, {1, 1}};
    CHECK_FALSE(sat_penetration(a, touching).overlap);

    Polygon apart{{1.5, 0}, {2, 0}, {2, 1}, {1.5, 1}};
    CHECK_FALSE(sat_penetration(a, apart).overlap);
}

TEST_CASE("sat_penetration MTV separates and is tight along its axis") {
    Rng rng(77);
    int tested = 0;
    while (tested < 50) {
        Polygon a = random_convex(rng, {0, 0});
        Polygon b = random_convex(rng, {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)});
        SatResult res = sat_penetration(a, b);
        if (!res.overlap || res.depth < 1e-3) continue;
        ++tested;

        auto shifted = [&](double amount) {
            Polygon out = b;
            for (Vec2& v : out) v += res.axis * amount;
            return out;
        };
        CHECK_FALSE(sat_penetration(a, shifted(res.depth + 1e-9)).overlap);
        CHECK(sat_penetration(a, shifted(res.depth * 0.999)).overlap);
    }
}

TEST_CASE("convex_distance hand cases") {
    Polygon a = unit_square();
    Polygon b{{1.5, 0}, {2.5, 0}, {2.5, 1}, {1.5, 1}};
    CHECK(convex_distance(a, b) == Catch::Approx(0.5));

    Polygon overlapping{{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}};
    CHECK(convex_distance(a, overlapping) == 0.0);

    // diagonal corner-to-corner gap
    Polygon c{{2, 2}, {3, 2}, {3, 3}, {2, 3}};
    CHECK(convex_distance(a, c) == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("convex_distance agrees with dense boundary sampling") {
    Rng rng(505);
    const int samples = 800;
    for (int trial = 0; trial < 40; ++trial) {
        Polygon a = random_convex(rng, {rng.uniform(-0.3, -0.12), rng.uniform(-0.1, 0.1)});
        Polygon b = random_convex(rng, {rng.uniform(0.12, 0.3), rng.uniform(-0.1, 0.1)});
        double d = convex_distance(a, b);
        REQUIRE(d > 0.0);

        auto pa = sample_boundary(a, samples);
        auto pb = sample_boundary(b, samples);
        double sampled = std::numeric_limits<double>::infinity();
        for (Vec2 u : pa)
            for (Vec2 v : pb) sampled = std::min(sampled, norm(u - v));

        double tol = (polygon_perimeter(a) + polygon_perimeter(b)) / samples + 1e-12;
        REQUIRE(d <= sampled + 1e-12);
        REQUIRE(d >= sampled - tol);
    }
}

TEST_CASE("convex intersection area, exact cases") {
    Polygon a = unit_square();
    Polygon b{{0.5, 0.25}, {1.5, 0.25}, {1.5, 1.25}, {0.5, 1.25}};
    CHECK(convex_intersection_area(a, b) == Catch::Approx(0.375));

    Polygon far{{5, 5}, {6, 5}, {6, 6}, {5, 6}};
    CHECK(convex_intersection_area(a, far) == 0.0);

    Polygon inner{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}};
    CHECK(convex_intersection_area(a, inner) == Catch::Approx(0.25));
    CHECK(convex_intersection_area(inner, a) == Catch::Approx(0.25));
}

TEST_CASE("convex intersection area agrees with Monte Carlo") {
    Rng rng(31337);
    for (int trial = 0; trial < 6; ++trial) {
        Polygon a = random_convex(rng, {0, 0});
        Polygon b = random_convex(rng, {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)});
        double exact = convex_intersection_area(a, b);

        Aabb box = polygon_aabb(a);
        for (Vec2 v : b) box.expand(v);
        double bw = box.hi.x - box.lo.x, bh = box.hi.y - box.lo.y;
        const int n = 300000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            Vec2 p{box.lo.x + bw * rng.next_double(), box.lo.y + bh * rng.next_double()};
            if (convex_contains(a, p) && convex_contains(b, p)) ++hits;
        }
        double est = bw * bh * double(hits) / n;
        double sigma = bw * bh * std::sqrt(0.25 / n);
        REQUIRE(std::abs(exact - est) <= 6.0 * sigma + 1e-6);
    }
}

TEST_CASE("polygon_moments of a rotated rectangle match the analytic solution") {
    const double w = 0.08, h = 0.04, th = 0.7;
    Polygon rect{{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
    Pose2 pose{{0.3, -0.2}, th};
    PolygonMoments m = polygon_moments(transform(rect, pose));

    CHECK(m.area == Catch::Approx(w * h));
    CHECK(m.centroid.x == Catch::Approx(0.3));
    CHECK(m.centroid.y == Catch::Approx(-0.2));
    CHECK(m.extents[0] == Catch::Approx(w / std::sqrt(12.0)).epsilon(1e-9));
    CHECK(m.extents[1] == Catch::Approx(h / std::sqrt(12.0)).epsilon(1e-9));

    Vec2 expected{std::cos(th), std::sin(th)};
    CHECK(std::abs(dot(m.axes[0], expected)) == Catch::Approx(1.0).epsilon(1e-9));
    // canonical form keeps the leading axis in the positive-x half plane
    CHECK(m.axes[0].x >= 0.0);
    CHECK(std::abs(dot(m.axes[0], m.axes[1])) < 1e-12);
}

TEST_CASE("polygon_moments of the unit square") {
    PolygonMoments m = polygon_moments(unit_square());
    CHECK(m.area == Catch::Approx(1.0));
    CHECK(m.centroid.x == Catch::Approx(0.5));
    CHECK(m.extents[0] == Catch::Approx(1.0 / std::sqrt(12.0)));
    CHECK(m.extents[1] == Catch::Approx(1.0 / std::sqrt(12.0)));
    CHECK(norm(m.axes[0]) == Catch::Approx(1.0));
    CHECK(norm(m.axes[1]) == Catch::Approx(1.0));
}

TEST_CASE("polygon_moments covariance agrees with Monte Carlo integration") {
    Rng rng(909);
    for (int trial = 0; trial < 5; ++trial) {
        Polygon poly = random_convex(rng, {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)});
        PolygonMoments m = polygon_moments(poly);

        Aabb box = polygon_aabb(poly);
        double bw = box.hi.x - box.lo.x, bh = box.hi.y - box.lo.y;
        const int want = 300000;
        int got = 0;
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        while (got < want) {
            Vec2 p{box.lo.x + bw * rng.next_double(), box.lo.y + bh * rng.next_double()};
            if (!convex_contains(poly, p)) continue;
            ++got;
            sx += p.x;
            sy += p.y;
            sxx += p.x * p.x;
            sxy += p.x * p.y;
            syy += p.y * p.y;
        }
        double mx = sx / want, my = sy / want;
        double cxx = sxx / want - mx * mx;
        double cxy = sxy / want - mx * my;
        double cyy = syy / want - my * my;

        // reconstruct covariance from the eigendecomposition
        double e0 = m.extents[0] * m.extents[0], e1 = m.extents[1] * m.extents[1];
        double rxx = e0 * m.axes[0].x * m.axes[0].x + e1 * m.axes[1].x * m.axes[1].x;
        double rxy = e0 * m.axes[0].x * m.axes[0].y + e1 * m.axes[1].x * m.axes[1].y;
        double ryy = e0 * m.axes[0].y * m.axes[0].y + e1 * m.axes[1].y * m.axes[1].y;

        double tol = 0.04 * (cxx + cyy) + 1e-10;
        CHECK(std::abs(m.centroid.x - mx) < 3e-4);
        CHECK(std::abs(m.centroid.y - my) < 3e-4);
        CHECK(std::abs(rxx - cxx) < tol);
        CHECK(std::abs(rxy - cxy) < tol);
        CHECK(std::abs(ryy - cyy) < tol);
    }
}

TEST_CASE("polygon_aabb") {
    Aabb box = polygon_aabb({{0.2, -0.1}, {0.9, 0.3}, {0.4, 0.8}});
    CHECK(box.lo.x == Catch::Approx(0.2));
    CHECK(box.lo.y == Catch::Approx(-0.1));
    CHECK(box.hi.x == Catch::Approx(0.9));
    CHECK(box.hi.y == Catch::Approx(0.8));
    CHECK(box.valid());
    CHECK_FALSE(Aabb{}.valid());
}

TEST_CASE("wrap_angle maps into [-pi, pi)") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(0.1) == Catch::Approx(0.1));
    CHECK(wrap_angle(-0.1) == Catch::Approx(-0.1));
    CHECK(wrap_angle(2.0 * M_PI + 0.3) == Catch::Approx(0.3));
    CHECK(wrap_angle(3.0 * M_PI) == Catch::Approx(-M_PI));

    Rng rng(4242);
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform(-50.0, 50.0);
        double w = wrap_angle(x);
        REQUIRE(w >= -M_PI);
        REQUIRE(w < M_PI);
        REQUIRE(std::abs(std::sin(w) - std::sin(x)) < 1e-9);
        REQUIRE(std::abs(std::cos(w) - std::cos(x)) < 1e-9);
    }
}
