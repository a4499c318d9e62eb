#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "windsim/scenarios.hpp"

#include "test_util.hpp"

using namespace windsim;

namespace {

// Small, fast scenario: 20^3 domain, 4x4x8 tower, easterly wind.
ScenarioSpec mini_scenario(double speed, double fluctuation)
{
    ScenarioSpec spec;
    spec.name = "mini";
    spec.scene.obstacles.push_back({{8, 8, 0}, {12, 12, 8}});
    spec.scene.ground_z = 0.0;
    spec.range = {{0, 0, 0}, 20, 20, 20, 1.0};
    spec.wind.sources.push_back({BoundaryFace::XPos, speed,
                                 fluctuation > 0 ? WindKind::Turbulent : WindKind::Normal,
                                 fluctuation});
    spec.wind.solver.max_iterations = 400;
    spec.plan.kind = FlightPlan::Kind::Orbit;
    spec.plan.orbit_center = {10, 10, 5};
    spec.plan.orbit_radius = 6.0;
    spec.plan.tolerance = 2.5;
    spec.drone.kp = 3.0;
    spec.drone.kd = 4.0;
    spec.seed = 7;
    spec.dt = 0.02;
    spec.timeout = 45.0;
    return spec;
}

} // namespace

TEST_CASE("uniform baseline is position-independent and sums sources")
{
    const ScanRange range{{0, 0, 0}, 12, 12, 12, 1.0};
    SECTION("single easterly source")
    {
        WindConfig cfg;
        cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Normal, 0.0});
        const WindIndex index = uniform_wind_baseline(cfg, range);
        std::mt19937_64 rng(4);
        for (int q = 0; q < 1000; ++q) {
            const Vec3 pos = testutil::random_point(rng, -5.0, 17.0);
            REQUIRE(query_wind(index, pos) == Vec3{-10.0, 0.0, 0.0});
        }
    }
    SECTION("opposing sources cancel")
    {
        WindConfig cfg;
        cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Normal, 0.0});
        cfg.sources.push_back({BoundaryFace::XNeg, 10.0, WindKind::Normal, 0.0});
        const WindIndex index = uniform_wind_baseline(cfg, range);
        CHECK(query_wind(index, {3, 3, 3}) == Vec3{});
    }
    SECTION("turbulent baseline stays within the fluctuation band")
    {
        WindConfig cfg;
        cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Turbulent, 0.3});
        const WindIndex index = uniform_wind_baseline(cfg, range);
        FluctuationState fluct = make_fluctuation(index, 11);
        for (int i = 0; i < 2000; ++i) {
            fluct = advance_fluctuation(fluct, 0.02);
            const double mag = norm(query_wind(index, {6, 6, 6}, 0.0, &fluct));
            REQUIRE(mag >= 7.0 - 1e-9);
            REQUIRE(mag <= 13.0 + 1e-9);
        }
    }
}

TEST_CASE("deviation metrics")
{
    Trajectory traj;
    traj.dt = 0.02;
    SECTION("points on the nominal have zero deviation")
    {
        const std::vector<Vec3> nominal{{0, 0, 5}, {10, 0, 5}};
        for (int i = 0; i <= 10; ++i)
            traj.samples.push_back({i * 0.02, {double(i), 0, 5}, {}, {}, {},
                                    FlightStatus::Active});
        traj.terminal = FlightStatus::Completed;
        const auto m = deviation_metrics(traj, nominal, {5, 0, 5}, {1, 0, 0}, 5.0);
        CHECK(m.max_dev == 0.0);
        CHECK(m.mean_dev == 0.0);
    }
    SECTION("constant 2 m lateral offset from a straight nominal")
    {
        const std::vector<Vec3> nominal{{0, 0, 5}, {10, 0, 5}};
        for (int i = 0; i <= 10; ++i)
            traj.samples.push_back({i * 0.02, {double(i), 2.0, 5}, {}, {}, {},
                                    FlightStatus::Active});
        const auto m = deviation_metrics(traj, nominal, {5, 0, 5}, {1, 0, 0}, 5.0);
        CHECK(m.max_dev == Catch::Approx(2.0));
        CHECK(m.mean_dev == Catch::Approx(2.0));
    }
    SECTION("orbit sampled at radius + 1 has mean deviation about 1")
    {
        FlightPlan plan;
        plan.kind = FlightPlan::Kind::Orbit;
        plan.orbit_center = {0, 0, 10};
        plan.orbit_radius = 10.0;
        const auto nominal = plan.nominal_polyline();
        for (int s = 0; s < 360; ++s) {
            const double th = s * std::numbers::pi / 180.0;
            traj.samples.push_back({s * 0.02,
                                    {11.0 * std::cos(th), 11.0 * std::sin(th), 10.0},
                                    {}, {}, {}, FlightStatus::Active});
        }
        const auto m = deviation_metrics(traj, nominal, {0, 0, 10}, {1, 0, 0}, 10.0);
        CHECK(m.mean_dev == Catch::Approx(1.0).margin(0.02));
    }
    SECTION("windward/leeward and above/below splits classify correctly")
    {
        const std::vector<Vec3> nominal{{0, 0, 5}, {10, 0, 5}};
        // wind blows +x; split at x = 5: windward side is x < 5
        traj.samples.push_back({0.0, {2, 1, 4}, {}, {}, {}, FlightStatus::Active}); // windward, below
        traj.samples.push_back({0.02, {8, 3, 6}, {}, {}, {}, FlightStatus::Active}); // leeward, above
        const auto m = deviation_metrics(traj, nominal, {5, 0, 5}, {1, 0, 0}, 5.0);
        CHECK(m.windward_samples == 1);
        CHECK(m.leeward_samples == 1);
        CHECK(m.above_samples == 1);
        CHECK(m.below_samples == 1);
        CHECK(m.windward_mean == Catch::Approx(std::sqrt(2.0)));
        CHECK(m.leeward_mean == Catch::Approx(std::sqrt(10.0)));
    }
    SECTION("empty inputs error")
    {
        CHECK_THROWS_AS(deviation_metrics(traj, {}, {}, {1, 0, 0}, 0.0), ValidationError);
    }
}

TEST_CASE("zero-ish wind scenario: both arms fly the same path")
{
    // Opposing equal sources make the baseline exactly zero and the solved
    // field near-zero, so the two trajectories coincide.
    ScenarioSpec spec = mini_scenario(5.0, 0.0);
    spec.wind.sources.push_back({BoundaryFace::XNeg, 5.0, WindKind::Normal, 0.0});
    const ScenarioResult result = run_scenario(spec);
    CHECK(result.cfd_metrics.status == FlightStatus::Completed);
    CHECK(result.baseline_metrics.status == FlightStatus::Completed);
    CHECK(std::abs(result.cfd_metrics.mean_dev - result.baseline_metrics.mean_dev) < 0.25);
}

TEST_CASE("mini scenario runs deterministically and produces sane metrics")
{
    const ScenarioSpec spec = mini_scenario(6.0, 0.3);
    const ScenarioResult a = run_scenario(spec);
    const ScenarioResult b = run_scenario(spec);

    CHECK(a.solver_converged);
    CHECK(a.cfd_metrics.samples > 100);
    CHECK(a.baseline_metrics.samples > 100);
    CHECK(a.roofline_z == Catch::Approx(8.0));
    CHECK(a.split_point.x == Catch::Approx(10.0).margin(0.01));

    // paired seeds: identical fluctuation sequences, bitwise-equal reruns
    REQUIRE(a.cfd_trajectory.samples.size() == b.cfd_trajectory.samples.size());
    for (std::size_t i = 0; i < a.cfd_trajectory.samples.size(); ++i) {
        REQUIRE(a.cfd_trajectory.samples[i].position == b.cfd_trajectory.samples[i].position);
        REQUIRE(a.cfd_trajectory.samples[i].wind == b.cfd_trajectory.samples[i].wind);
    }
    CHECK(a.cfd_metrics.mean_dev == b.cfd_metrics.mean_dev);
    CHECK(a.baseline_metrics.max_dev == b.baseline_metrics.max_dev);
}

TEST_CASE("scenario spec file loads and validates")
{
    const auto fixture =
        std::filesystem::path(WINDSIM_FIXTURES_DIR) / "mini_tower_scenario.json";
    const ScenarioSpec spec = load_scenario_spec(fixture);
    CHECK(spec.name == "mini_tower");
    CHECK(spec.range.nx == 20);
    CHECK(spec.wind.sources.size() == 1);
    CHECK(spec.plan.kind == FlightPlan::Kind::Orbit);

    SECTION("plan outside the range is rejected")
    {
        ScenarioSpec bad = spec;
        bad.plan.orbit_center = {100, 100, 5};
        CHECK_THROWS_WITH(bad.validate(),
                          Catch::Matchers::ContainsSubstring("leaves the scan range"));
    }
}

TEST_CASE("metrics file is stable key=value text")
{
    const ScenarioSpec spec = mini_scenario(6.0, 0.3);
    const ScenarioResult r = run_scenario(spec);
    std::ostringstream a, b;
    write_metrics(r, spec.name, a);
    write_metrics(r, spec.name, b);
    CHECK(a.str() == b.str());
    CHECK(a.str().find("cfd.mean_dev=") != std::string::npos);
    CHECK(a.str().find("baseline.leeward_minus_windward=") != std::string::npos);
}

TEST_CASE("benchmark pipeline timing table")
{
    Scene scene = tower_scene();
    WindConfig cfg;
    cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Normal, 0.0});
    cfg.solver.max_iterations = 20;
    cfg.solver.final_pressure_iterations = 100;
    const std::vector<ScanRange> sizes{centered_range(scene, 12), centered_range(scene, 16)};
    const auto rows = benchmark_pipeline(scene, cfg, sizes);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cells == 12u * 12 * 12);
    CHECK(rows[1].cells == 16u * 16 * 16);
    for (const auto& r : rows) {
        CHECK(r.scan_seconds > 0.0);
        CHECK(r.solve_index_seconds > 0.0);
        CHECK(r.scan_seconds < r.solve_index_seconds);
    }
    std::ostringstream csv;
    write_bench_csv(rows, csv);
    CHECK(csv.str().rfind("cells,nx,ny,nz,scan_seconds,solve_index_seconds,converged\n", 0) ==
          0);
}

TEST_CASE("built-in fixtures validate")
{
    CHECK_NOTHROW(tower_scenario().validate());
    CHECK_NOTHROW(two_buildings_scenario().validate());
    const Scene two = two_buildings_scene();
    REQUIRE(two.obstacles.size() == 2);
    CHECK(two.obstacles[0].hi.z == 40.0);
    CHECK(two.obstacles[1].hi.z == 20.0);
    // 10 m corridor between the facing walls
    CHECK(two.obstacles[1].lo.y - two.obstacles[0].hi.y == Catch::Approx(10.0));
}
