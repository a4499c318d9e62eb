#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "windsim/geometry.hpp"

#include "test_util.hpp"

using namespace windsim;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body)
{
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path;
}

} // namespace

TEST_CASE("scene file round-trips a single box")
{
    const auto path = write_temp(
        "windsim_scene_one_box.json",
        R"({"obstacles":[{"min":[2,2,0],"max":[6,6,4]}]})");
    const Scene scene = load_scene(path);
    REQUIRE(scene.obstacles.size() == 1);
    CHECK(scene.obstacles[0].lo == Vec3{2, 2, 0});
    CHECK(scene.obstacles[0].hi == Vec3{6, 6, 4});
}

TEST_CASE("scene parsing rejects bad input")
{
    SECTION("empty file body is a parse error")
    {
        const auto path = write_temp("windsim_scene_empty.json", "");
        CHECK_THROWS_AS(load_scene(path), ParseError);
    }
    SECTION("empty obstacle list is a valid scene")
    {
        const auto path = write_temp("windsim_scene_no_obstacles.json", R"({"obstacles":[]})");
        const Scene scene = load_scene(path);
        CHECK(scene.obstacles.empty());
    }
    SECTION("missing obstacles key names the field")
    {
        const auto path = write_temp("windsim_scene_missing.json", R"({"ground_z":0})");
        CHECK_THROWS_WITH(load_scene(path), Catch::Matchers::ContainsSubstring("obstacles"));
    }
    SECTION("inverted box names the offending obstacle")
    {
        const auto path = write_temp(
            "windsim_scene_inverted.json",
            R"({"obstacles":[{"min":[6,2,0],"max":[2,6,4]}]})");
        CHECK_THROWS_WITH(load_scene(path),
                          Catch::Matchers::ContainsSubstring("obstacles[0]"));
    }
    SECTION("missing file is an io error")
    {
        CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), IoError);
    }
}

TEST_CASE("segment_blocked on boxes")
{
    Scene scene;
    scene.obstacles.push_back({{2, -1, 0}, {6, 1, 4}});

    SECTION("crossing segment is blocked")
    {
        CHECK(segment_blocked(scene, {{0, 0, 1}, {10, 0, 1}}));
    }
    SECTION("segment above all geometry is clear")
    {
        CHECK_FALSE(segment_blocked(scene, {{0, 0, 10}, {10, 0, 10}}));
    }
    SECTION("segment entirely inside the box is blocked")
    {
        CHECK(segment_blocked(scene, {{3, 0, 1}, {5, 0, 2}}));
    }
    SECTION("segment grazing a face plane is clear (open-interior semantics)")
    {
        CHECK_FALSE(segment_blocked(scene, {{0, 1, 2}, {10, 1, 2}}));   // along y = hi.y
        CHECK_FALSE(segment_blocked(scene, {{0, 0, 4}, {10, 0, 4}}));   // along z = hi.z
        CHECK_FALSE(segment_blocked(scene, {{0, 0, 1}, {2, 0, 1}}));    // endpoint on x = lo.x
    }
}

TEST_CASE("segment_blocked on ground, triangles and heightmap")
{
    SECTION("ground blocks only strictly-below dips")
    {
        Scene scene;
        scene.ground_z = 0.0;
        CHECK(segment_blocked(scene, {{0, 0, 1}, {1, 0, -1}}));
        CHECK_FALSE(segment_blocked(scene, {{0, 0, 0}, {1, 0, 0}})); // lies on the plane
        CHECK_FALSE(segment_blocked(scene, {{0, 0, 2}, {1, 0, 2}}));
    }
    SECTION("triangle crossing")
    {
        Scene scene;
        scene.triangles.push_back({{0, 0, 2}, {4, 0, 2}, {0, 4, 2}});
        CHECK(segment_blocked(scene, {{1, 1, 0}, {1, 1, 5}}));
        CHECK_FALSE(segment_blocked(scene, {{3.5, 3.5, 0}, {3.5, 3.5, 5}})); // misses the face
    }
    SECTION("heightmap surface")
    {
        Scene scene;
        Heightmap hm;
        hm.origin_x = 0.0;
        hm.origin_y = 0.0;
        hm.cell_size = 2.0;
        hm.z = {{0.0, 0.0, 4.0}, {0.0, 0.0, 4.0}, {0.0, 0.0, 4.0}}; // ramp up in x
        scene.heightmap = hm;
        scene.validate();
        CHECK(segment_blocked(scene, {{0, 2, 1}, {4, 2, 1}}));       // runs into the ramp
        CHECK_FALSE(segment_blocked(scene, {{0, 2, 5}, {4, 2, 5}})); // clears the crest
        CHECK_FALSE(segment_blocked(scene, {{0, 2, 1}, {1, 2, 1}})); // stays over the flat
    }
}

TEST_CASE("segment_blocked properties on random scenes")
{
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const Scene scene = testutil::random_box_scene(rng, 20.0, 4);
        const Vec3 a = testutil::random_point(rng, -2.0, 22.0);
        const Vec3 b = testutil::random_point(rng, -2.0, 22.0);
        const bool fwd = segment_blocked(scene, {a, b});

        // symmetric under endpoint swap
        CHECK(fwd == segment_blocked(scene, {b, a}));

        // translation invariance
        const Vec3 shift = testutil::random_point(rng, -40.0, 40.0);
        Scene moved = scene;
        for (Box& box : moved.obstacles) {
            box.lo += shift;
            box.hi += shift;
        }
        CHECK(fwd == segment_blocked(moved, {a + shift, b + shift}));

        // agreement with the independent face-decomposition oracle
        CHECK(fwd == testutil::oracle_segment_blocked(scene, a, b));
    }
}

TEST_CASE("single-box sampled oracle agrees with the kernel")
{
    // Spec oracle: 1000 interior-containment samples plus exact slab clipping.
    std::mt19937_64 rng(99);
    auto sampled_oracle = [](const Box& box, const Vec3& a, const Vec3& b) {
        for (int s = 0; s <= 1000; ++s) {
            const Vec3 p = a + (b - a) * (double(s) / 1000.0);
            bool inside = true;
            for (int ax = 0; ax < 3; ++ax)
                if (p[ax] <= box.lo[ax] || p[ax] >= box.hi[ax]) {
                    inside = false;
                    break;
                }
            if (inside)
                return true;
        }
        return false;
    };
    int blocked_count = 0;
    for (int trial = 0; trial < 500; ++trial) {
        Scene scene = testutil::random_box_scene(rng, 10.0, 1);
        const Box& box = scene.obstacles[0];
        const Vec3 a = testutil::random_point(rng, -1.0, 11.0);
        const Vec3 b = testutil::random_point(rng, -1.0, 11.0);
        const bool kernel = segment_hits_box_interior(a, b, box);
        blocked_count += kernel;
        if (sampled_oracle(box, a, b))
            CHECK(kernel); // containment sample implies interior intersection
        CHECK(kernel == testutil::oracle_segment_hits_box(a, b, box));
    }
    CHECK(blocked_count > 20); // the trials actually exercised hits
}

TEST_CASE("scene_bounds")
{
    SECTION("single box is its own bounds")
    {
        Scene scene;
        scene.obstacles.push_back({{2, 2, 0}, {6, 6, 4}});
        const auto b = scene_bounds(scene);
        REQUIRE(b.has_value());
        CHECK(b->lo == Vec3{2, 2, 0});
        CHECK(b->hi == Vec3{6, 6, 4});
    }
    SECTION("two disjoint boxes give the union hull")
    {
        Scene scene;
        scene.obstacles.push_back({{0, 0, 0}, {1, 1, 1}});
        scene.obstacles.push_back({{5, 7, 2}, {6, 9, 3}});
        const auto b = scene_bounds(scene);
        REQUIRE(b.has_value());
        CHECK(b->lo == Vec3{0, 0, 0});
        CHECK(b->hi == Vec3{6, 9, 3});
    }
    SECTION("empty scene has no bounds")
    {
        CHECK_FALSE(scene_bounds(Scene{}).has_value());
    }
}

TEST_CASE("scene validation catches degenerate triangles")
{
    Scene scene;
    scene.triangles.push_back({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
    CHECK_THROWS_AS(scene.validate(), ValidationError);
}
