// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Expensive artifacts (the two
// solved scenario fields) are computed once and shared. Exit code is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "windsim/dronesim.hpp"
#include "windsim/geometry.hpp"
#include "windsim/kdtree.hpp"
#include "windsim/scenarios.hpp"
#include "windsim/voxelizer.hpp"
#include "windsim/windfield.hpp"
#include "windsim/windsolver.hpp"

#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace windsim;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail)
{
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++g_failures;
}

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- C1: voxelizer vs independent oracle on randomized scenes ---------------

void criterion_1()
{
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(20240601);
    const ScanRange range{{0, 0, 0}, 32, 32, 32, 1.0};
    std::size_t cells_checked = 0, mismatches = 0;
    for (int scene_i = 0; scene_i < 50; ++scene_i) {
        const Scene scene = testutil::random_box_scene(rng, 32.0, 5);
        const OccupancyGrid grid = scan_terrain(scene, range);
        for (int k = 0; k < range.nz; ++k)
            for (int j = 0; j < range.ny; ++j)
                for (int i = 0; i < range.nx; ++i) {
                    const bool oracle = testutil::oracle_obstruction_check(
                        scene, range.cell_center(i, j, k), range.cell_size);
                    mismatches += (grid.occupied(i, j, k) != oracle);
                    ++cells_checked;
                }
    }
    const double elapsed = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "50 scenes x 32^3 cells: %zu/%zu cells agree with the oracle, %.1f s "
                  "(limit 30 s)",
                  cells_checked - mismatches, cells_checked, elapsed);
    report("C1 voxelizer oracle equivalence", mismatches == 0 && elapsed < 30.0, buf);
}

// --- C2: grid-aligned box exactness ------------------------------------------

void criterion_2()
{
    Scene scene;
    scene.obstacles.push_back({{2, 2, 0}, {6, 6, 4}});
    const ScanRange range{{0, 0, 0}, 8, 8, 8, 1.0};
    const OccupancyGrid grid = scan_terrain(scene, range);
    std::size_t false_pos = 0, false_neg = 0;
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) {
                const bool expect = i >= 2 && i <= 5 && j >= 2 && j <= 5 && k <= 3;
                if (grid.occupied(i, j, k) && !expect)
                    ++false_pos;
                if (!grid.occupied(i, j, k) && expect)
                    ++false_neg;
            }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "64-cell box fixture: %zu occupied, %zu false positives, %zu false "
                  "negatives",
                  grid.occupied_count(), false_pos, false_neg);
    report("C2 grid-aligned box exactness",
           false_pos == 0 && false_neg == 0 && grid.occupied_count() == 64, buf);
}

// --- C3: uniform-flow recovery ----------------------------------------------

void criterion_3()
{
    WindConfig cfg;
    cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Normal, 0.0});
    const OccupancyGrid grid(ScanRange{{0, 0, 0}, 32, 32, 32, 1.0});
    const WindField field = solve_wind(grid, cfg);
    double max_err = 0.0;
    for (const Vec3& v : field.velocity)
        max_err = std::max(max_err, norm(v - Vec3{-10.0, 0.0, 0.0}));
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "32^3 obstacle-free, 10 m/s inflow: converged=%d, max error %.3e m/s "
                  "(limit 1e-5)",
                  int(field.converged), max_err);
    report("C3 uniform-flow recovery", field.converged && max_err < 1e-6 * 10.0, buf);
}

// --- C4 + C9 share the tower scenario solve ----------------------------------

struct TowerArtifacts {
    ScenarioSpec spec;
    OccupancyGrid grid{ScanRange{{0, 0, 0}, 1, 1, 1, 1.0}};
    WindField field;
    double scan_solve_seconds = 0.0;
};

TowerArtifacts solve_tower()
{
    TowerArtifacts art;
    art.spec = tower_scenario();
    const auto t0 = clock_type::now();
    art.grid = scan_terrain(art.spec.scene, art.spec.range);
    art.field = solve_wind(art.grid, art.spec.wind);
    art.scan_solve_seconds = seconds_since(t0);
    return art;
}

void criterion_4(const TowerArtifacts& art)
{
    const double tol = resolved_divergence_tolerance(art.spec.wind, art.spec.range);
    double maxd = 0.0;
    const ScanRange& r = art.spec.range;
    for (int k = 1; k + 1 < r.nz; ++k)
        for (int j = 1; j + 1 < r.ny; ++j)
            for (int i = 1; i + 1 < r.nx; ++i)
                if (!art.grid.occupied(i, j, k))
                    maxd = std::max(maxd, std::abs(divergence(art.field, i, j, k)));

    // Sealed-side channel continuity: same-parity planes bracketing the tower.
    const double up = mass_flux(art.field, 0, 40);
    const double down = mass_flux(art.field, 0, 8);
    const double flux_err = std::abs(up - down) / std::abs(up);

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "tower 48^3: converged=%d, max|div| %.3e (tol %.3e), bracketing plane "
                  "fluxes %.1f / %.1f m^3/s (%.3f%% apart, limit 1%%)",
                  int(art.field.converged), maxd, tol, up, down, 100.0 * flux_err);
    report("C4 incompressibility", art.field.converged && maxd <= tol && flux_err <= 0.01,
           buf);
}

// --- C5 + C10 share the two-buildings solve -----------------------------------

struct BuildingsArtifacts {
    ScenarioSpec spec;
    OccupancyGrid grid{ScanRange{{0, 0, 0}, 1, 1, 1, 1.0}};
    WindField field;
};

BuildingsArtifacts solve_buildings()
{
    BuildingsArtifacts art;
    art.spec = two_buildings_scenario();
    art.grid = scan_terrain(art.spec.scene, art.spec.range);
    art.field = solve_wind(art.grid, art.spec.wind);
    return art;
}

void criterion_5(const BuildingsArtifacts& art)
{
    auto region_mean = [&](int i0, int i1, int j0, int j1, int k0, int k1) {
        double sum = 0.0;
        int n = 0;
        for (int k = k0; k < k1; ++k)
            for (int j = j0; j < j1; ++j)
                for (int i = i0; i < i1; ++i)
                    if (!art.grid.occupied(i, j, k)) {
                        sum += norm(art.field.at(i, j, k));
                        ++n;
                    }
        return n ? sum / n : 0.0;
    };
    // >= 5 m above the 40 m roof, over the taller building's footprint
    const double above = region_mean(14, 34, 12, 22, 45, 50);
    // inter-building corridor at mid-height
    const double corridor = region_mean(14, 34, 22, 32, 15, 25);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "two buildings, 20 m/s north: mean speed above taller roof %.2f m/s vs "
                  "corridor mid-height %.2f m/s (need > 1.1x)",
                  above, corridor);
    report("C5 obstacle sheltering/acceleration", above > 1.1 * corridor, buf);
}

// --- C6: k-d tree oracle equivalence and speedup ------------------------------

void criterion_6()
{
    // Synthetic 48^3 field: 110592 entries (>= 1e5).
    const int n = 48;
    const ScanRange r{{0, 0, 0}, n, n, n, 1.0};
    WindField field;
    field.grid = OccupancyGrid(r);
    field.velocity.resize(r.cell_count());
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                field.velocity[r.linear(i, j, k)] = {0.1 * i, -0.05 * j, 0.02 * k};
    const WindIndex index = build_index(field);

    std::mt19937_64 rng(424242);
    const int queries = 10000;
    std::vector<Vec3> points;
    points.reserve(queries);
    for (int q = 0; q < queries; ++q)
        points.push_back(testutil::random_point(rng, -2.0, n + 2.0));

    std::vector<double> kd_ns(queries), brute_ns(queries);
    int mismatches = 0;
    for (int q = 0; q < queries; ++q) {
        const auto t0 = clock_type::now();
        const WindSample& got = index.nearest(points[q]);
        const auto t1 = clock_type::now();
        const WindSample& want = brute_force_nearest(index.entries(), points[q]);
        const auto t2 = clock_type::now();
        kd_ns[q] = std::chrono::duration<double, std::nano>(t1 - t0).count();
        brute_ns[q] = std::chrono::duration<double, std::nano>(t2 - t1).count();
        if (!(got.cell == want.cell) || !(got.velocity == want.velocity))
            ++mismatches;
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    const double kd_med = median(kd_ns);
    const double brute_med = median(brute_ns);
    const double speedup = brute_med / kd_med;
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "%zu entries, %d queries: %d mismatches; median query %.0f ns vs brute "
                  "%.0f ns (%.0fx, need >= 100x)",
                  index.entry_count(), queries, mismatches, kd_med, brute_med, speedup);
    report("C6 k-d tree oracle equivalence",
           index.entry_count() >= 100000 && mismatches == 0 && speedup >= 100.0, buf);
}

// --- C7: fluctuation bounds and long-run mean ---------------------------------

void criterion_7()
{
    FluctuationState s = make_fluctuation(20240602, 0.3);
    int out_of_bounds = 0;
    for (int i = 0; i < 10000; ++i) {
        s = advance_fluctuation(s, 0.02);
        if (s.factor < 0.7 || s.factor > 1.3)
            ++out_of_bounds;
    }
    FluctuationState m = make_fluctuation(20240603, 0.3);
    double sum = 0.0;
    const int steps = 100000;
    for (int i = 0; i < steps; ++i) {
        m = advance_fluctuation(m, 0.02);
        sum += m.factor;
    }
    const double mean = sum / steps;
    char buf[180];
    std::snprintf(buf, sizeof buf,
                  "10^4 samples: %d outside [0.7, 1.3]; mean over 10^5 steps %.4f "
                  "(need 1.0 +/- 0.02)",
                  out_of_bounds, mean);
    report("C7 fluctuation bounds", out_of_bounds == 0 && std::abs(mean - 1.0) <= 0.02, buf);
}

// --- C8: zero-wind flight fidelity --------------------------------------------

void criterion_8()
{
    const ScanRange r{{-16, -16, 0}, 32, 32, 32, 1.0};
    WindField still;
    still.grid = OccupancyGrid(r);
    still.velocity.assign(r.cell_count(), Vec3{});
    still.converged = true;
    const WindIndex index = build_index(still);
    const DroneParams params;

    FlightPlan line;
    line.kind = FlightPlan::Kind::Waypoints;
    line.waypoints = {{0, 0, 10}, {10, 0, 10}};
    const Trajectory lt = run_flight(line, index, params, 1, 0.02, 60.0);
    const double line_err = norm(lt.samples.back().position - Vec3{10, 0, 10});

    FlightPlan orbit;
    orbit.kind = FlightPlan::Kind::Orbit;
    orbit.orbit_center = {0, 0, 12};
    orbit.orbit_radius = 8.0;
    const Trajectory ot = run_flight(orbit, index, params, 1, 0.02, 180.0);
    const auto nominal = orbit.nominal_polyline();
    double orbit_dev = 0.0;
    for (const auto& s : ot.samples)
        orbit_dev = std::max(orbit_dev, point_polyline_distance(s.position, nominal));

    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "line: %s, final error %.3f m; orbit: %s, max cross-track %.3f m "
                  "(limit 0.5 m)",
                  status_name(lt.terminal), line_err, status_name(ot.terminal), orbit_dev);
    report("C8 zero-wind flight fidelity",
           lt.terminal == FlightStatus::Completed && line_err < 0.5 &&
               ot.terminal == FlightStatus::Completed && orbit_dev < 0.5,
           buf);
}

// --- C9: scenario 1 ordinal replication ----------------------------------------

void criterion_9(const TowerArtifacts& art)
{
    const auto t0 = clock_type::now();
    const ScenarioResult result = run_scenario_with_field(art.spec, art.grid, art.field);
    const double flight_seconds = seconds_since(t0);
    const double total = art.scan_solve_seconds + flight_seconds;

    const double cfd_split =
        result.cfd_metrics.leeward_mean - result.cfd_metrics.windward_mean;
    const double base_split =
        result.baseline_metrics.leeward_mean - result.baseline_metrics.windward_mean;
    char buf[260];
    std::snprintf(buf, sizeof buf,
                  "orbit in tower field: leeward-windward %.3f m (cfd) vs %.3f m "
                  "(baseline); cfd %s, baseline %s; pipeline %.0f s (limit 300 s)",
                  cfd_split, base_split, status_name(result.cfd_metrics.status),
                  status_name(result.baseline_metrics.status), total);
    report("C9 scenario 1 ordinal replication", cfd_split > base_split && total < 300.0,
           buf);
}

// --- C10: scenario 2 ordinal replication ---------------------------------------

void criterion_10(const BuildingsArtifacts& art)
{
    const ScenarioResult result = run_scenario_with_field(art.spec, art.grid, art.field);
    auto ratio = [](const DeviationMetrics& m) {
        return m.below_mean > 0.0 ? m.above_mean / m.below_mean
                                  : std::numeric_limits<double>::infinity();
    };
    const double cfd_ratio = ratio(result.cfd_metrics);
    const double base_ratio = ratio(result.baseline_metrics);
    char buf[260];
    std::snprintf(buf, sizeof buf,
                  "takeoff: above/below roofline deviation ratio %.2f (cfd, need > 2) vs "
                  "%.2f (baseline, need < cfd); roofline %.0f m",
                  cfd_ratio, base_ratio, result.roofline_z);
    report("C10 scenario 2 ordinal replication", cfd_ratio > 2.0 && base_ratio < cfd_ratio,
           buf);
}

// --- C11: benchmark shape -------------------------------------------------------

void criterion_11()
{
    const Scene scene = tower_scene();
    WindConfig cfg;
    cfg.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Normal, 0.0});
    cfg.solver.max_iterations = 150;
    cfg.solver.pressure_iterations = 24;
    cfg.solver.final_pressure_iterations = 2000;
    std::vector<ScanRange> sizes;
    for (int n : {32, 48, 64})
        sizes.push_back(centered_range(scene, n));
    const auto rows = benchmark_pipeline(scene, cfg, sizes);

    bool scan_fast = true;
    for (const auto& r : rows)
        scan_fast = scan_fast && r.scan_seconds < 0.10 * r.solve_index_seconds;

    // log-log slope of scan time vs cell count
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rows) {
        const double x = std::log(double(r.cells));
        const double y = std::log(r.scan_seconds);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = double(rows.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "scan %.3f/%.3f/%.3f s vs solve+index %.1f/%.1f/%.1f s; scan < 10%% of "
                  "solve: %s; scan log-log slope %.2f (need 1.0 +/- 0.2)",
                  rows[0].scan_seconds, rows[1].scan_seconds, rows[2].scan_seconds,
                  rows[0].solve_index_seconds, rows[1].solve_index_seconds,
                  rows[2].solve_index_seconds, scan_fast ? "yes" : "NO", slope);
    report("C11 benchmark shape", scan_fast && std::abs(slope - 1.0) <= 0.2, buf);
}

// --- C12: end-to-end determinism through the CLI --------------------------------

void criterion_12()
{
    const fs::path dir = fs::temp_directory_path() / "windsim_acceptance_c12";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string spec = (fs::path(WINDSIM_FIXTURES_DIR) / "mini_tower_scenario.json").string();
    auto invoke = [&](const std::string& out) {
        const std::string cmd = std::string("\"") + WINDSIM_CLI_PATH + "\" scenario --spec " +
                                spec + " --out " + out + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    const int rc1 = invoke((dir / "a").string());
    const int rc2 = invoke((dir / "b").string());
    bool identical = rc1 == 0 && rc2 == 0;
    std::string differing = "none";
    for (const char* name : {"cfd_trajectory.csv", "baseline_trajectory.csv", "metrics.txt"}) {
        if (slurp(dir / "a" / name) != slurp(dir / "b" / name)) {
            identical = false;
            differing = name;
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "two scenario invocations: exit %d/%d, first differing artifact: %s",
                  rc1, rc2, differing.c_str());
    report("C12 determinism end-to-end", identical, buf);
}

} // namespace

int main()
{
    std::printf("windsim acceptance suite\n");
    const auto t0 = clock_type::now();

    criterion_1();
    criterion_2();
    criterion_3();

    const TowerArtifacts tower = solve_tower();
    criterion_4(tower);

    const BuildingsArtifacts buildings = solve_buildings();
    criterion_5(buildings);

    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9(tower);
    criterion_10(buildings);
    criterion_11();
    criterion_12();

    std::printf("%d of 12 criteria passed in %.0f s\n", 12 - g_failures,
                seconds_since(t0));
    return g_failures;
}
