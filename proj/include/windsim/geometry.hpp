#pragma once

// Scene representation and segment-intersection queries. The scene stands in
// for a game-engine level: axis-aligned boxes for buildings, an optional
// heightmap for terrain, optional triangles for imported meshes, and an
// optional flat ground plane.
//
// Intersection semantics: a segment is "blocked" by a box only if it meets
// the box's open interior. Contact that merely grazes a face, edge or corner
// does not block; this keeps grid-aligned boxes from claiming the neighbouring
// cell layer. Triangles are surfaces and use closed intersection. The ground
// plane blocks only segments that dip strictly below it.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "windsim/common.hpp"
#include "windsim/vec3.hpp"

namespace windsim {

struct Box {
    Vec3 lo;
    Vec3 hi;
};

struct Triangle {
    Vec3 a, b, c;
};

// Regular elevation grid: node (col, row) sits at
// (origin_x + col*cell_size, origin_y + row*cell_size) with elevation
// z[row][col]; the surface is bilinear between nodes.
struct Heightmap {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cell_size = 1.0;
    std::vector<std::vector<double>> z;

    std::size_t rows() const { return z.size(); }
    std::size_t cols() const { return z.empty() ? 0 : z[0].size(); }
    double max_x() const { return origin_x + cell_size * double(cols() - 1); }
    double max_y() const { return origin_y + cell_size * double(rows() - 1); }
};

struct Segment {
    Vec3 a;
    Vec3 b;
};

struct Aabb {
    Vec3 lo;
    Vec3 hi;
};

struct Scene {
    std::vector<Box> obstacles;
    std::optional<Heightmap> heightmap;
    std::vector<Triangle> triangles;
    std::optional<double> ground_z;

    void validate() const;
};

inline void Scene::validate() const
{
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const Box& b = obstacles[i];
        for (int ax = 0; ax < 3; ++ax) {
            if (!(b.lo[ax] < b.hi[ax]))
                throw ValidationError("obstacles[" + std::to_string(i) +
                                      "]: min must be strictly less than max on axis " +
                                      std::to_string(ax));
        }
        if (!finite(b.lo) || !finite(b.hi))
            throw ValidationError("obstacles[" + std::to_string(i) + "]: non-finite corner");
    }
    for (std::size_t i = 0; i < triangles.size(); ++i) {
        const Triangle& t = triangles[i];
        if (!finite(t.a) || !finite(t.b) || !finite(t.c))
            throw ValidationError("triangles[" + std::to_string(i) + "]: non-finite vertex");
        if (norm2(cross(t.b - t.a, t.c - t.a)) <= 0.0)
            throw ValidationError("triangles[" + std::to_string(i) + "]: degenerate (zero area)");
    }
    if (heightmap) {
        const Heightmap& hm = *heightmap;
        if (hm.cell_size <= 0.0)
            throw ValidationError("heightmap: cell_size must be > 0");
        if (hm.rows() < 2 || hm.cols() < 2)
            throw ValidationError("heightmap: need at least 2x2 elevation nodes");
        for (std::size_t r = 0; r < hm.rows(); ++r)
            if (hm.z[r].size() != hm.cols())
                throw ValidationError("heightmap: ragged elevation rows");
    }
}

// ---------------------------------------------------------------------------
// Intersection kernels
// ---------------------------------------------------------------------------

// Open-interior slab test: true iff the segment's parameter interval strictly
// overlaps the open box on all three axes.
inline bool segment_hits_box_interior(const Vec3& a, const Vec3& b, const Box& box)
{
    double t0 = 0.0, t1 = 1.0;
    for (int ax = 0; ax < 3; ++ax) {
        const double s = a[ax];
        const double d = b[ax] - a[ax];
        const double lo = box.lo[ax];
        const double hi = box.hi[ax];
        if (d == 0.0) {
            if (s <= lo || s >= hi)
                return false;
            continue;
        }
        double ta = (lo - s) / d;
        double tb = (hi - s) / d;
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1)
            return false;
    }
    return t0 < t1;
}

// Moeller-Trumbore with inclusive bounds; a triangle is a surface, so
// touching counts. Parallel segments never hit.
inline bool segment_hits_triangle(const Vec3& a, const Vec3& b, const Triangle& tri)
{
    const Vec3 dir = b - a;
    const Vec3 e1 = tri.b - tri.a;
    const Vec3 e2 = tri.c - tri.a;
    const Vec3 pv = cross(dir, e2);
    const double det = dot(e1, pv);
    if (det == 0.0)
        return false;
    const double inv = 1.0 / det;
    const Vec3 tv = a - tri.a;
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0)
        return false;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(dir, qv) * inv;
    if (v < 0.0 || u + v > 1.0)
        return false;
    const double t = dot(e2, qv) * inv;
    return t >= 0.0 && t <= 1.0;
}

namespace detail {

// Piecewise check of z(t) - H(x(t), y(t)) < 0. Within one heightmap cell the
// bilinear surface along a straight segment is a quadratic in t, so each span
// is tested exactly via its endpoints and interior vertex.
inline bool segment_under_heightmap(const Vec3& a, const Vec3& b, const Heightmap& hm)
{
    const double x0 = hm.origin_x, y0 = hm.origin_y, c = hm.cell_size;
    const double x1 = hm.max_x(), y1 = hm.max_y();

    std::vector<double> ts;
    ts.push_back(0.0);
    ts.push_back(1.0);
    auto add_crossings = [&ts](double s, double d, double lo, double hi, double step) {
        if (d == 0.0)
            return;
        const double tmin = std::min((lo - s) / d, (hi - s) / d);
        const double tmax = std::max((lo - s) / d, (hi - s) / d);
        const int n0 = int(std::floor((std::min(s, s + d) - lo) / step)) - 1;
        const int n1 = int(std::ceil((std::max(s, s + d) - lo) / step)) + 1;
        for (int n = n0; n <= n1; ++n) {
            const double t = (lo + n * step - s) / d;
            if (t > 0.0 && t < 1.0)
                ts.push_back(t);
        }
        if (tmin > 0.0 && tmin < 1.0)
            ts.push_back(tmin);
        if (tmax > 0.0 && tmax < 1.0)
            ts.push_back(tmax);
    };
    add_crossings(a.x, b.x - a.x, x0, x1, c);
    add_crossings(a.y, b.y - a.y, y0, y1, c);
    std::sort(ts.begin(), ts.end());

    auto point_at = [&](double t) { return a + (b - a) * t; };
    auto height_at = [&](double x, double y) {
        const double fx = (x - x0) / c;
        const double fy = (y - y0) / c;
        int i = std::clamp(int(std::floor(fx)), 0, int(hm.cols()) - 2);
        int j = std::clamp(int(std::floor(fy)), 0, int(hm.rows()) - 2);
        const double u = fx - i;
        const double v = fy - j;
        const double z00 = hm.z[j][i], z10 = hm.z[j][i + 1];
        const double z01 = hm.z[j + 1][i], z11 = hm.z[j + 1][i + 1];
        return z00 * (1 - u) * (1 - v) + z10 * u * (1 - v) + z01 * (1 - u) * v + z11 * u * v;
    };

    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double ta = ts[k], tb = ts[k + 1];
        if (!(tb > ta))
            continue;
        const double tm = 0.5 * (ta + tb);
        const Vec3 pm = point_at(tm);
        if (pm.x < x0 || pm.x > x1 || pm.y < y0 || pm.y > y1)
            continue;
        auto q = [&](double t) {
            const Vec3 p = point_at(t);
            return p.z - height_at(p.x, p.y);
        };
        const double qa = q(ta), qm = q(tm), qb = q(tb);
        if (qa < 0.0 || qm < 0.0 || qb < 0.0)
            return true;
        // Exact quadratic through the three samples; check its vertex.
        const double A = 2.0 * (qa - 2.0 * qm + qb);
        const double B = -3.0 * qa + 4.0 * qm - qb;
        if (A > 0.0) {
            const double s = -B / (2.0 * A);
            if (s > 0.0 && s < 1.0) {
                const double qv = qa + B * s + A * s * s;
                if (qv < 0.0)
                    return true;
            }
        }
    }
    return false;
}

} // namespace detail

// True iff any scene geometry obstructs the segment. Total and symmetric in
// the endpoints.
inline bool segment_blocked(const Scene& scene, const Segment& seg)
{
    if (scene.ground_z && std::min(seg.a.z, seg.b.z) < *scene.ground_z)
        return true;
    for (const Box& b : scene.obstacles)
        if (segment_hits_box_interior(seg.a, seg.b, b))
            return true;
    for (const Triangle& t : scene.triangles)
        if (segment_hits_triangle(seg.a, seg.b, t))
            return true;
    if (scene.heightmap && detail::segment_under_heightmap(seg.a, seg.b, *scene.heightmap))
        return true;
    return false;
}

// Tightest axis-aligned box around all finite geometry, or nullopt for an
// empty scene. The infinite ground plane is not included.
inline std::optional<Aabb> scene_bounds(const Scene& scene)
{
    std::optional<Aabb> out;
    auto grow = [&out](const Vec3& p) {
        if (!out) {
            out = Aabb{p, p};
            return;
        }
        for (int ax = 0; ax < 3; ++ax) {
            out->lo[ax] = std::min(out->lo[ax], p[ax]);
            out->hi[ax] = std::max(out->hi[ax], p[ax]);
        }
    };
    for (const Box& b : scene.obstacles) {
        grow(b.lo);
        grow(b.hi);
    }
    for (const Triangle& t : scene.triangles) {
        grow(t.a);
        grow(t.b);
        grow(t.c);
    }
    if (scene.heightmap) {
        const Heightmap& hm = *scene.heightmap;
        double zmin = hm.z[0][0], zmax = hm.z[0][0];
        for (const auto& row : hm.z)
            for (double v : row) {
                zmin = std::min(zmin, v);
                zmax = std::max(zmax, v);
            }
        grow({hm.origin_x, hm.origin_y, zmin});
        grow({hm.max_x(), hm.max_y(), zmax});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene file parsing (JSON schema, lengths in meters)
// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 json_vec3(const nlohmann::json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        throw ParseError(what + ": expected an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace detail

inline Scene parse_scene(const nlohmann::json& j, const std::string& source = "scene")
{
    if (!j.is_object())
        throw ParseError(source + ": top level must be an object");
    if (!j.contains("obstacles"))
        throw ParseError(source + ": missing required key 'obstacles'");
    if (!j["obstacles"].is_array())
        throw ParseError(source + ": 'obstacles' must be a list");

    Scene scene;
    std::size_t idx = 0;
    for (const auto& ob : j["obstacles"]) {
        const std::string what = source + ": obstacles[" + std::to_string(idx) + "]";
        if (!ob.is_object() || !ob.contains("min") || !ob.contains("max"))
            throw ParseError(what + ": expected object with 'min' and 'max'");
        scene.obstacles.push_back(
            {detail::json_vec3(ob["min"], what + ".min"), detail::json_vec3(ob["max"], what + ".max")});
        ++idx;
    }
    if (j.contains("triangles")) {
        idx = 0;
        for (const auto& tr : j["triangles"]) {
            const std::string what = source + ": triangles[" + std::to_string(idx) + "]";
            if (!tr.is_array() || tr.size() != 3)
                throw ParseError(what + ": expected an array of 3 vertices");
            scene.triangles.push_back({detail::json_vec3(tr[0], what + "[0]"),
                                       detail::json_vec3(tr[1], what + "[1]"),
                                       detail::json_vec3(tr[2], what + "[2]")});
            ++idx;
        }
    }
    if (j.contains("heightmap")) {
        const auto& h = j["heightmap"];
        const std::string what = source + ": heightmap";
        if (!h.is_object() || !h.contains("origin") || !h.contains("cell_size") ||
            !h.contains("elevations"))
            throw ParseError(what + ": expected object with origin, cell_size, elevations");
        Heightmap hm;
        const auto& origin = h["origin"];
        if (!origin.is_array() || origin.size() != 2)
            throw ParseError(what + ".origin: expected [x, y]");
        hm.origin_x = origin[0].get<double>();
        hm.origin_y = origin[1].get<double>();
        hm.cell_size = h["cell_size"].get<double>();
        for (const auto& row : h["elevations"]) {
            if (!row.is_array())
                throw ParseError(what + ".elevations: expected rows of numbers");
            hm.z.emplace_back(row.begin(), row.end());
        }
        scene.heightmap = std::move(hm);
    }
    if (j.contains("ground_z"))
        scene.ground_z = j["ground_z"].get<double>();

    scene.validate();
    return scene;
}

inline Scene load_scene(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("scene file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_scene(j, path.string());
}

} // namespace windsim
