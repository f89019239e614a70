#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "singulate/geometry.hpp"
#include "singulate/rng.hpp"

namespace singulate {

/// Axis-aligned rectangular table; its convex hull is itself.
struct TableSpec {
    double width = 1.0;
    double height = 0.8;
    Vec2 origin{0.0, 0.0};

    bool contains(Vec2 p, double tol = 0.0) const {
        return p.x >= origin.x - tol && p.x <= origin.x + width + tol &&
               p.y >= origin.y - tol && p.y <= origin.y + height + tol;
    }
    Vec2 center() const { return origin + Vec2{0.5 * width, 0.5 * height}; }
    double diagonal() const { return std::hypot(width, height); }
};

struct SceneObject {
    int id = 0;
    Polygon polygon;     ///< convex CCW vertex list, body frame, meters
    Pose2 pose;          ///< body -> world
    Vec2 mass_center{};  ///< body frame

    Polygon world_polygon() const { return transform(polygon, pose); }
    Vec2 world_mass_center() const { return pose.apply(mass_center); }

    /// Largest distance from the mass center to a vertex (rigid invariant).
    double max_half_extent() const {
        double m = 0.0;
        for (Vec2 v : polygon) m = std::max(m, norm(v - mass_center));
        return m;
    }
};

struct Scene {
    TableSpec table;
    std::vector<SceneObject> objects;
    std::uint64_t rng_seed = 0;
};

struct PushCommand {
    Vec2 start{};
    Vec2 direction{1.0, 0.0};  ///< unit vector
    double length = 0.2;
};

struct Displacement {
    Vec2 translation{};
    double rotation = 0.0;
};

struct PushOutcome {
    std::vector<int> moved_ids;  ///< sorted; displacement above motion_epsilon
    std::map<int, Displacement> displacement_map;
    std::optional<int> contacted_first;
    bool truncated = false;   ///< resolution jammed; push stopped early
    double advance = 0.0;     ///< pusher travel actually applied, meters
};

/// Quasi-static push model constants.
struct SimParams {
    double sub_step = 0.002;         ///< pusher advance per sub-step, m
    int max_iterations = 200;        ///< penetration-resolution passes per sub-step
    double contact_epsilon = 0.001;  ///< touching threshold, m
    double motion_epsilon = 0.005;   ///< "moved" threshold, m
    double rotation_gain = 1.85;     ///< rad per meter at full torque arm
};

constexpr double default_singulation_threshold = 0.03;  // m

struct PlacementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void validate_polygon(const Polygon& poly) {
    if (poly.size() < 3) throw std::invalid_argument("polygon needs >= 3 vertices");
    if (!is_convex_ccw(poly)) throw std::invalid_argument("polygon must be convex and counter-clockwise");
    if (polygon_area(poly) <= 1e-8) throw std::invalid_argument("polygon area too small");
}

inline void validate_command(const PushCommand& cmd) {
    if (std::abs(norm(cmd.direction) - 1.0) > 1e-9)
        throw std::invalid_argument("push direction must be a unit vector");
    if (!(cmd.length > 0.0)) throw std::invalid_argument("push length must be positive");
}

inline bool table_contains_polygon(const TableSpec& table, const Polygon& world_poly,
                                   double tol = 1e-9) {
    for (Vec2 v : world_poly)
        if (!table.contains(v, tol)) return false;
    return true;
}

inline void validate_scene(const Scene& scene) {
    if (!(scene.table.width > 0.0) || !(scene.table.height > 0.0))
        throw std::invalid_argument("table dimensions must be positive");
    if (scene.objects.empty()) throw std::invalid_argument("scene needs at least one object");
    for (const auto& obj : scene.objects) {
        validate_polygon(obj.polygon);
        if (!convex_contains(obj.polygon, obj.mass_center))
            throw std::invalid_argument("mass center must lie inside the polygon");
        if (!table_contains_polygon(scene.table, obj.world_polygon()))
            throw std::invalid_argument("object outside the table");
    }
}

/// Exact boundary distance between two objects' world polygons.
inline double object_distance(const SceneObject& a, const SceneObject& b) {
    return convex_distance(a.world_polygon(), b.world_polygon());
}

/// Min over pairs of polygon boundary distance; +infinity for < 2 objects.
inline double min_pairwise_distance(const Scene& scene) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < scene.objects.size(); ++i)
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j)
            best = std::min(best, object_distance(scene.objects[i], scene.objects[j]));
    return best;
}

/// Distance from one object to its nearest neighbour; +infinity when alone.
inline double object_min_distance(const Scene& scene, int object_id) {
    const SceneObject* self = nullptr;
    for (const auto& o : scene.objects)
        if (o.id == object_id) self = &o;
    if (!self) throw std::invalid_argument("object_min_distance: unknown object id");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : scene.objects)
        if (o.id != object_id) best = std::min(best, object_distance(*self, o));
    return best;
}

inline bool is_singulated(const Scene& scene, double threshold = default_singulation_threshold) {
    return min_pairwise_distance(scene) >= threshold;
}

namespace detail {

inline double circumradius(const Polygon& poly, Vec2 center) {
    double r = 0.0;
    for (Vec2 v : poly) r = std::max(r, norm(v - center));
    return r;
}

/// Translation that brings a world AABB back inside the table (zero if inside).
inline Vec2 clamp_shift(const TableSpec& table, const Aabb& box) {
    Vec2 shift{};
    if (box.lo.x < table.origin.x) shift.x = table.origin.x - box.lo.x;
    else if (box.hi.x > table.origin.x + table.width) shift.x = table.origin.x + table.width - box.hi.x;
    if (box.lo.y < table.origin.y) shift.y = table.origin.y - box.lo.y;
    else if (box.hi.y > table.origin.y + table.height) shift.y = table.origin.y + table.height - box.hi.y;
    return shift;
}

constexpr double resolve_slack = 1e-9;
// corrections at or below this scale keep the state consistent but do not
// count as progress, so slack-sized jitter cannot masquerade as a jam
constexpr double change_epsilon = 1e-7;

/// One full resolution pass: pusher containment, pairwise overlap, table clamp.
/// Returns true once a pass completes with no change (consistent state).
inline bool resolve_substep(Scene& scene, Vec2 pusher, Vec2 dir, const SimParams& params,
                            std::optional<int>& contacted_first) {
    const std::size_t n = scene.objects.size();
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        bool changed = false;

        for (std::size_t i = 0; i < n; ++i) {
            SceneObject& obj = scene.objects[i];
            Polygon world = obj.world_polygon();
            if (!convex_contains_strict(world, pusher, 0.0)) continue;
            BoundaryPoint bp = closest_boundary_point(world, pusher);
            if (bp.distance <= 0.0) continue;
            Vec2 out_dir = (pusher - bp.point) * (1.0 / bp.distance);
            double depth = bp.distance + resolve_slack;
            Vec2 mc = obj.world_mass_center();
            obj.pose.t += out_dir * depth;
            double arm = obj.max_half_extent();
            if (arm > 0.0) {
                double torque = cross(bp.point - mc, out_dir) / arm;
                double dtheta = params.rotation_gain * torque * bp.distance;
                obj.pose = rotate_about(obj.pose, mc + out_dir * depth, dtheta);
                obj.pose.theta = wrap_angle(obj.pose.theta);
            }
            if (!contacted_first) contacted_first = obj.id;
            if (bp.distance > change_epsilon) changed = true;
        }

        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                Polygon pa = scene.objects[i].world_polygon();
                Polygon pb = scene.objects[j].world_polygon();
                SatResult sat = sat_penetration(pa, pb);
                if (!sat.overlap || sat.depth <= resolve_slack) continue;
                // chain pushing: the object further along the push direction gives way
                double proj_i = dot(scene.objects[i].world_mass_center(), dir);
                double proj_j = dot(scene.objects[j].world_mass_center(), dir);
                bool j_down = proj_j > proj_i ||
                              (proj_j == proj_i && scene.objects[j].id > scene.objects[i].id);
                std::size_t down = j_down ? j : i;
                Vec2 axis = (down == j) ? sat.axis : -sat.axis;
                scene.objects[down].pose.t += axis * (sat.depth + resolve_slack);
                if (sat.depth > change_epsilon) changed = true;
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            Aabb box = polygon_aabb(scene.objects[i].world_polygon());
            Vec2 shift = clamp_shift(scene.table, box);
            if (shift.x != 0.0 || shift.y != 0.0) {
                scene.objects[i].pose.t += shift;
                if (norm(shift) > change_epsilon) changed = true;
            }
        }

        if (!changed) return true;
    }
    return false;
}

}  // namespace detail

/// Quasi-static straight-line push: a point pusher advances in fixed
/// sub-steps; penetrations are projected out and propagate down the chain;
/// table edges clamp. A jammed sub-step truncates the push at the last
/// consistent state.
inline std::pair<Scene, PushOutcome> apply_push(const Scene& scene, const PushCommand& cmd,
                                                const SimParams& params = {}) {
    validate_command(cmd);
    Scene cur = scene;
    PushOutcome outcome;

    const int n_steps = static_cast<int>(std::ceil(cmd.length / params.sub_step));
    double applied = 0.0;
    for (int k = 1; k <= n_steps; ++k) {
        double s = std::min(k * params.sub_step, cmd.length);
        Vec2 p = cmd.start + cmd.direction * s;
        Scene before_step = cur;
        if (!detail::resolve_substep(cur, p, cmd.direction, params, outcome.contacted_first)) {
            cur = before_step;
            outcome.truncated = true;
            break;
        }
        applied = s;
    }
    outcome.advance = applied;

    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        Displacement d;
        d.translation = cur.objects[i].pose.t - scene.objects[i].pose.t;
        d.rotation = wrap_angle(cur.objects[i].pose.theta - scene.objects[i].pose.theta);
        outcome.displacement_map[scene.objects[i].id] = d;
        if (norm(d.translation) > params.motion_epsilon)
            outcome.moved_ids.push_back(scene.objects[i].id);
    }
    return {std::move(cur), std::move(outcome)};
}

/// Convex polygon templates used as object footprints (centered on their centroid).
inline std::vector<Polygon> default_shape_library() {
    auto centered = [](Polygon poly) {
        Vec2 c = polygon_centroid(poly);
        for (Vec2& v : poly) v -= c;
        return poly;
    };
    auto box = [&](double w, double h) {
        return centered({{0, 0}, {w, 0}, {w, h}, {0, h}});
    };
    auto regular = [&](int sides, double radius) {
        Polygon poly;
        for (int i = 0; i < sides; ++i) {
            double a = 2.0 * M_PI * i / sides;
            poly.push_back({radius * std::cos(a), radius * std::sin(a)});
        }
        return centered(poly);
    };
    return {
        box(0.06, 0.06),
        box(0.09, 0.09),
        box(0.04, 0.10),
        box(0.05, 0.08),
        box(0.03, 0.12),
        centered({{0, 0}, {0.09, 0}, {0, 0.09}}),
        centered({{0, 0}, {0.08, 0}, {0.04, 0.069282}}),
        regular(5, 0.045),
        regular(6, 0.05),
    };
}

/// Rejection-sampled cluttered scene: each new object is slid into contact
/// with an already placed one, so the contact graph is connected by
/// construction.
inline Scene generate_scene(int n_objects, const std::vector<Polygon>& shape_library,
                            const TableSpec& table, std::uint64_t seed,
                            const SimParams& params = {}, int max_attempts = 400) {
    if (n_objects < 1) throw std::invalid_argument("generate_scene: n_objects must be >= 1");
    if (shape_library.empty()) throw std::invalid_argument("generate_scene: empty shape library");
    for (const auto& tpl : shape_library) validate_polygon(tpl);

    Rng rng(derive_seed(seed, 0xA11CE));
    Scene scene;
    scene.table = table;
    scene.rng_seed = seed;

    auto make_object = [&](int id, const Polygon& tpl, Vec2 pos, double theta) {
        SceneObject obj;
        obj.id = id;
        obj.polygon = tpl;
        obj.mass_center = polygon_centroid(tpl);
        obj.pose = {pos, theta};
        return obj;
    };

    // first object near the table center
    {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            const Polygon& tpl = shape_library[rng.uniform_index(shape_library.size())];
            double jitter = 0.1 * std::min(table.width, table.height);
            Vec2 pos = table.center() + Vec2{rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter)};
            double theta = rng.uniform(0.0, 2.0 * M_PI);
            SceneObject obj = make_object(0, tpl, pos, theta);
            if (table_contains_polygon(table, obj.world_polygon(), -1e-6)) {
                scene.objects.push_back(obj);
                placed = true;
            }
        }
        if (!placed) throw PlacementError("generate_scene: cannot place first object");
    }

    for (int i = 1; i < n_objects; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            const SceneObject& anchor = scene.objects[rng.uniform_index(scene.objects.size())];
            Polygon anchor_world = anchor.world_polygon();
            Vec2 anchor_c = polygon_centroid(anchor_world);

            const Polygon& tpl = shape_library[rng.uniform_index(shape_library.size())];
            double theta = rng.uniform(0.0, 2.0 * M_PI);
            double phi = rng.uniform(0.0, 2.0 * M_PI);
            Vec2 u{std::cos(phi), std::sin(phi)};

            SceneObject cand = make_object(i, tpl, {}, theta);
            double reach = detail::circumradius(anchor_world, anchor_c) +
                           detail::circumradius(cand.polygon, cand.mass_center) + 0.02;

            // slide toward the anchor until the gap hits half the contact budget
            const double target_gap = 0.5 * params.contact_epsilon;
            double lo = 0.0, hi = reach;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                cand.pose.t = anchor_c + u * (reach - mid) - rotate(cand.mass_center, theta);
                double d = convex_distance(cand.world_polygon(), anchor_world);
                if (d > target_gap) lo = mid;
                else hi = mid;
            }
            cand.pose.t = anchor_c + u * (reach - lo) - rotate(cand.mass_center, theta);

            Polygon cand_world = cand.world_polygon();
            double gap = convex_distance(cand_world, anchor_world);
            if (gap <= 0.0 || gap >= params.contact_epsilon) continue;
            if (!table_contains_polygon(table, cand_world, -1e-6)) continue;

            bool collides = false;
            for (const auto& other : scene.objects) {
                SatResult sat = sat_penetration(cand_world, other.world_polygon());
                if (sat.overlap && sat.depth > 1e-9) {
                    collides = true;
                    break;
                }
            }
            if (collides) continue;

            scene.objects.push_back(cand);
            placed = true;
        }
        if (!placed)
            throw PlacementError("generate_scene: placement failed after max attempts (table too crowded)");
    }

    // connectivity check over the touching graph
    std::vector<int> root(scene.objects.size());
    for (std::size_t i = 0; i < root.size(); ++i) root[i] = static_cast<int>(i);
    auto find = [&](int x) {
        while (root[x] != x) x = root[x] = root[root[x]];
        return x;
    };
    for (std::size_t i = 0; i + 1 < scene.objects.size(); ++i)
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j)
            if (object_distance(scene.objects[i], scene.objects[j]) < params.contact_epsilon)
                root[find(static_cast<int>(i))] = find(static_cast<int>(j));
    for (std::size_t i = 0; i < root.size(); ++i)
        if (find(static_cast<int>(i)) != find(0))
            throw PlacementError("generate_scene: contact graph not connected");

    validate_scene(scene);
    return scene;
}

}  // namespace singulate
