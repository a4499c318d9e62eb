#pragma once

// Scenario runner: scan -> solve -> index -> fly under the solved field, then
// fly the same plan and seed under an obstacle-blind uniform wind, and compare
// cross-track deviations. Also the wall-clock benchmark over grid sizes.
//
// Fixture geometry is a stand-in for the urban sites the scenarios model:
// `tower` is a 10x10x30 m block in an 80x80x60 m lot; `two_buildings` is a
// 40 m block upwind of a 20 m block with a 10 m corridor between them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "windsim/common.hpp"
#include "windsim/dronesim.hpp"
#include "windsim/geometry.hpp"
#include "windsim/voxelizer.hpp"
#include "windsim/windfield.hpp"
#include "windsim/windsolver.hpp"

namespace windsim {

struct ScenarioSpec {
    std::string name;
    Scene scene;
    ScanRange range;
    WindConfig wind;
    FlightPlan plan;
    DroneParams drone;
    std::uint64_t seed = 42;
    double dt = 0.02;
    double timeout = 120.0;
    double ground_z = 0.0;

    void validate() const
    {
        scene.validate();
        range.validate();
        wind.validate();
        plan.validate();
        drone.validate();
        if (!(dt > 0.0) || !(timeout > 0.0))
            throw ValidationError("scenario: dt and timeout must be > 0");
        const Vec3 lo = range.origin;
        const Vec3 hi = range.max_corner();
        for (const Vec3& p : plan.nominal_polyline())
            for (int ax = 0; ax < 3; ++ax)
                if (p[ax] < lo[ax] || p[ax] > hi[ax])
                    throw ValidationError("scenario: flight plan leaves the scan range");
    }
};

struct DeviationMetrics {
    double max_dev = 0.0;
    double mean_dev = 0.0;
    double windward_mean = 0.0;
    double leeward_mean = 0.0;
    double above_mean = 0.0;
    double below_mean = 0.0;
    std::size_t samples = 0;
    std::size_t windward_samples = 0;
    std::size_t leeward_samples = 0;
    std::size_t above_samples = 0;
    std::size_t below_samples = 0;
    FlightStatus status = FlightStatus::Active;
};

struct ScenarioResult {
    Trajectory cfd_trajectory;
    Trajectory baseline_trajectory;
    std::vector<Vec3> nominal_path;
    DeviationMetrics cfd_metrics;
    DeviationMetrics baseline_metrics;
    bool solver_converged = false;
    double solver_residual = 0.0;
    Vec3 mean_wind;     // combined source mean used for the splits
    Vec3 split_point;   // obstacle centroid
    double roofline_z = 0.0;
};

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = norm2(ab);
    if (len2 <= 0.0)
        return norm(p - a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return norm(p - (a + ab * t));
}

inline double point_polyline_distance(const Vec3& p, const std::vector<Vec3>& poly)
{
    if (poly.empty())
        throw ValidationError("deviation: empty nominal path");
    if (poly.size() == 1)
        return norm(p - poly[0]);
    double best = point_segment_distance(p, poly[0], poly[1]);
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        best = std::min(best, point_segment_distance(p, poly[i], poly[i + 1]));
    return best;
}

// Cross-track deviation of every sample from the nominal polyline, with the
// windward/leeward split (half-spaces through `split_point` normal to the
// mean wind; leeward is the side the wind blows toward) and an above/below
// split at `roofline_z`.
inline DeviationMetrics deviation_metrics(const Trajectory& traj,
                                          const std::vector<Vec3>& nominal,
                                          const Vec3& split_point, const Vec3& wind_direction,
                                          double roofline_z)
{
    if (traj.samples.empty())
        throw ValidationError("deviation: empty trajectory");
    if (nominal.empty())
        throw ValidationError("deviation: empty nominal path");
    const Vec3 wdir = normalized(wind_direction);
    DeviationMetrics m;
    m.status = traj.terminal;
    double sum = 0.0, wind_sum = 0.0, lee_sum = 0.0, above_sum = 0.0, below_sum = 0.0;
    for (const TrajectorySample& s : traj.samples) {
        const double d = point_polyline_distance(s.position, nominal);
        sum += d;
        m.max_dev = std::max(m.max_dev, d);
        ++m.samples;
        if (dot(s.position - split_point, wdir) >= 0.0) {
            lee_sum += d;
            ++m.leeward_samples;
        } else {
            wind_sum += d;
            ++m.windward_samples;
        }
        if (s.position.z >= roofline_z) {
            above_sum += d;
            ++m.above_samples;
        } else {
            below_sum += d;
            ++m.below_samples;
        }
    }
    m.mean_dev = sum / double(m.samples);
    m.windward_mean = m.windward_samples ? wind_sum / double(m.windward_samples) : 0.0;
    m.leeward_mean = m.leeward_samples ? lee_sum / double(m.leeward_samples) : 0.0;
    m.above_mean = m.above_samples ? above_sum / double(m.above_samples) : 0.0;
    m.below_mean = m.below_samples ? below_sum / double(m.below_samples) : 0.0;
    return m;
}

// Obstacle-blind constant field over the range: every cell holds the vector
// sum of the source means. Fluctuation handling is identical to the solved
// field, so paired runs differ only in spatial structure.
inline WindIndex uniform_wind_baseline(const WindConfig& config, const ScanRange& range)
{
    config.validate();
    range.validate();
    WindField field;
    field.grid = OccupancyGrid(range);
    field.velocity.assign(range.cell_count(), config.combined_mean_velocity());
    field.converged = true;
    field.final_residual = 0.0;
    field.config_hash = config.hash();
    field.turbulence_amplitude = config.turbulence_amplitude();
    return build_index(field);
}

namespace detail {

inline Vec3 occupied_centroid(const OccupancyGrid& grid)
{
    const ScanRange& r = grid.range();
    Vec3 sum{};
    std::size_t n = 0;
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (grid.occupied(i, j, k)) {
                    sum += r.cell_center(i, j, k);
                    ++n;
                }
    if (n == 0) {
        const Vec3 hi = r.max_corner();
        return (r.origin + hi) * 0.5;
    }
    return sum / double(n);
}

inline double roofline_of(const OccupancyGrid& grid)
{
    const ScanRange& r = grid.range();
    int k_top = -1;
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny && k > k_top; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (grid.occupied(i, j, k)) {
                    k_top = k;
                    break;
                }
    return k_top < 0 ? r.origin.z : r.origin.z + (k_top + 1) * r.cell_size;
}

} // namespace detail

// Paired flights from an already-solved field; run_scenario is the full
// pipeline. Both arms share plan, drone, dt and seed, so their fluctuation
// sequences are identical and metric differences are attributable to the
// field's spatial structure.
inline ScenarioResult run_scenario_with_field(const ScenarioSpec& spec,
                                              const OccupancyGrid& grid,
                                              const WindField& field)
{
    const WindIndex cfd_index = build_index(field);
    const WindIndex base_index = uniform_wind_baseline(spec.wind, spec.range);

    ScenarioResult result;
    result.solver_converged = field.converged;
    result.solver_residual = field.final_residual;
    result.cfd_trajectory = run_flight(spec.plan, cfd_index, spec.drone, spec.seed, spec.dt,
                                       spec.timeout, spec.ground_z, spec.wind.air_density);
    result.baseline_trajectory =
        run_flight(spec.plan, base_index, spec.drone, spec.seed, spec.dt, spec.timeout,
                   spec.ground_z, spec.wind.air_density);
    result.nominal_path = spec.plan.nominal_polyline();
    result.mean_wind = spec.wind.combined_mean_velocity();
    result.split_point = detail::occupied_centroid(grid);
    result.roofline_z = detail::roofline_of(grid);
    result.cfd_metrics = deviation_metrics(result.cfd_trajectory, result.nominal_path,
                                           result.split_point, result.mean_wind,
                                           result.roofline_z);
    result.baseline_metrics = deviation_metrics(result.baseline_trajectory,
                                                result.nominal_path, result.split_point,
                                                result.mean_wind, result.roofline_z);
    return result;
}

// Full pipeline: scan -> solve -> paired flights. Solver non-convergence is
// reported via the result flags, not an error.
inline ScenarioResult run_scenario(const ScenarioSpec& spec)
{
    spec.validate();
    const OccupancyGrid grid = scan_terrain(spec.scene, spec.range);
    const WindField field = solve_wind(grid, spec.wind);
    return run_scenario_with_field(spec, grid, field);
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

struct BenchRow {
    std::size_t cells = 0;
    int nx = 0, ny = 0, nz = 0;
    double scan_seconds = 0.0;
    double solve_index_seconds = 0.0;
    bool converged = false;
};

// Cube range of edge n centered on the scene's footprint, sitting on z = 0.
inline ScanRange centered_range(const Scene& scene, int n, double cell_size = 1.0)
{
    const auto bounds = scene_bounds(scene);
    Vec3 center{0.0, 0.0, 0.0};
    if (bounds)
        center = (bounds->lo + bounds->hi) * 0.5;
    ScanRange r;
    r.nx = r.ny = r.nz = n;
    r.cell_size = cell_size;
    r.origin = {center.x - 0.5 * n * cell_size, center.y - 0.5 * n * cell_size, 0.0};
    return r;
}

// Times the scan phase for every size first (best of five runs, so all scan
// measurements share the same machine state), then the solve+index phase per
// size.
inline std::vector<BenchRow> benchmark_pipeline(const Scene& scene, const WindConfig& config,
                                                const std::vector<ScanRange>& sizes)
{
    if (sizes.empty())
        throw ValidationError("benchmark: no sizes given");
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    std::vector<OccupancyGrid> grids;
    for (const ScanRange& range : sizes) {
        BenchRow row;
        row.cells = range.cell_count();
        row.nx = range.nx;
        row.ny = range.ny;
        row.nz = range.nz;
        OccupancyGrid grid(range);
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = clock::now();
            grid = scan_terrain(scene, range);
            best = std::min(best,
                            std::chrono::duration<double>(clock::now() - t0).count());
        }
        row.scan_seconds = best;
        rows.push_back(row);
        grids.push_back(std::move(grid));
    }
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        const auto t1 = clock::now();
        const WindField field = solve_wind(grids[s], config);
        const WindIndex index = build_index(field);
        rows[s].solve_index_seconds =
            std::chrono::duration<double>(clock::now() - t1).count();
        rows[s].converged = field.converged;
        (void)index;
    }
    return rows;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out)
{
    out << "cells,nx,ny,nz,scan_seconds,solve_index_seconds,converged\n";
    for (const BenchRow& r : rows)
        out << r.cells << ',' << r.nx << ',' << r.ny << ',' << r.nz << ','
            << format_double(r.scan_seconds) << ',' << format_double(r.solve_index_seconds)
            << ',' << (r.converged ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Built-in fixtures (dimensions are artifact choices, documented in README)
// ---------------------------------------------------------------------------

inline Scene tower_scene()
{
    Scene scene;
    scene.obstacles.push_back({{35.0, 35.0, 0.0}, {45.0, 45.0, 30.0}});
    scene.ground_z = 0.0;
    return scene;
}

inline Scene two_buildings_scene()
{
    Scene scene;
    // Upwind (south) block 40 m tall, downwind (north) block 20 m tall,
    // 10 m corridor between their facing walls.
    scene.obstacles.push_back({{14.0, 12.0, 0.0}, {34.0, 22.0, 40.0}});
    scene.obstacles.push_back({{14.0, 32.0, 0.0}, {34.0, 42.0, 20.0}});
    scene.ground_z = 0.0;
    return scene;
}

// Orbit around the tower in gusty 10 m/s easterly wind. The 48^3 range is a
// centered window of the 80x80x60 lot. Capture tolerance is 3 m: a PD
// controller holds a steady-state offset of roughly kp^-1 times the wind
// drag acceleration, so the default 0.5 m radius would stall under wind.
inline ScenarioSpec tower_scenario()
{
    ScenarioSpec spec;
    spec.name = "tower_orbit";
    spec.scene = tower_scene();
    spec.range = {{16.0, 16.0, 0.0}, 48, 48, 48, 1.0};
    spec.wind.sources.push_back({BoundaryFace::XPos, 10.0, WindKind::Turbulent, 0.3});
    spec.plan.kind = FlightPlan::Kind::Orbit;
    spec.plan.orbit_center = {40.0, 40.0, 15.0};
    spec.plan.orbit_radius = 15.0;
    spec.plan.angular_speed = 0.3;
    spec.plan.laps = 1;
    spec.plan.tolerance = 3.0;
    spec.drone.kp = 3.0;
    spec.drone.kd = 4.0;
    spec.seed = 42;
    spec.dt = 0.02;
    spec.timeout = 120.0;
    spec.ground_z = 0.0;
    return spec;
}

// Vertical takeoff from the sheltered corridor into a 20 m/s northward wind.
inline ScenarioSpec two_buildings_scenario()
{
    ScenarioSpec spec;
    spec.name = "two_buildings_takeoff";
    spec.scene = two_buildings_scene();
    spec.range = {{0.0, 0.0, 0.0}, 48, 48, 80, 1.0};
    spec.wind.sources.push_back({BoundaryFace::YNeg, 20.0, WindKind::Normal, 0.0});
    // The tall-building wake settles slowly; accept a slightly coarser steady
    // state and give it headroom.
    spec.wind.solver.steady_tolerance = 5e-4;
    spec.wind.solver.max_iterations = 4000;
    spec.plan.kind = FlightPlan::Kind::Takeoff;
    spec.plan.start = {24.0, 27.0, 1.0};
    spec.plan.takeoff_altitude = 60.0;
    spec.plan.tolerance = 3.0;
    spec.drone.kp = 3.0;
    spec.drone.kd = 4.0;
    spec.seed = 42;
    spec.dt = 0.02;
    spec.timeout = 60.0;
    spec.ground_z = 0.0;
    return spec;
}

// ---------------------------------------------------------------------------
// Scenario spec file
// ---------------------------------------------------------------------------

inline ScenarioSpec scenario_spec_from_json(const nlohmann::json& j,
                                            const std::filesystem::path& base_dir,
                                            const std::string& source = "scenario spec")
{
    if (!j.is_object())
        throw ParseError(source + ": top level must be an object");
    for (const char* key : {"scene", "range", "wind", "plan"})
        if (!j.contains(key))
            throw ParseError(source + ": missing required key '" + std::string(key) + "'");

    ScenarioSpec spec;
    spec.name = j.value("name", "scenario");
    if (j["scene"].is_string())
        spec.scene = load_scene(base_dir / j["scene"].get<std::string>());
    else
        spec.scene = parse_scene(j["scene"], source + ".scene");

    const auto& r = j["range"];
    if (!r.is_object() || !r.contains("origin") || !r.contains("cells"))
        throw ParseError(source + ".range: expected 'origin' and 'cells'");
    spec.range.origin = detail::json_vec3(r["origin"], source + ".range.origin");
    const auto& cells = r["cells"];
    if (!cells.is_array() || cells.size() != 3)
        throw ParseError(source + ".range.cells: expected [nx, ny, nz]");
    spec.range.nx = cells[0].get<int>();
    spec.range.ny = cells[1].get<int>();
    spec.range.nz = cells[2].get<int>();
    if (r.contains("cell_size"))
        spec.range.cell_size = r["cell_size"].get<double>();

    spec.wind = wind_config_from_json(j["wind"], source + ".wind");
    spec.plan = flight_plan_from_json(j["plan"], source + ".plan");
    if (j.contains("drone"))
        spec.drone = drone_params_from_json(j["drone"]);
    if (j.contains("seed"))
        spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dt"))
        spec.dt = j["dt"].get<double>();
    if (j.contains("timeout"))
        spec.timeout = j["timeout"].get<double>();
    if (j.contains("ground_z"))
        spec.ground_z = j["ground_z"].get<double>();
    spec.validate();
    return spec;
}

inline ScenarioSpec load_scenario_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("scenario spec not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return scenario_spec_from_json(j, path.parent_path(), path.string());
}

// Metrics summary, key=value lines in a fixed order so identical runs emit
// identical bytes.
inline void write_metrics(const ScenarioResult& r, const std::string& name, std::ostream& out)
{
    auto emit = [&out](const std::string& key, const std::string& value) {
        out << key << '=' << value << '\n';
    };
    emit("scenario", name);
    emit("solver_converged", r.solver_converged ? "1" : "0");
    emit("solver_residual", format_double(r.solver_residual));
    emit("roofline_z", format_double(r.roofline_z));
    auto arm = [&](const std::string& prefix, const DeviationMetrics& m) {
        emit(prefix + ".status", status_name(m.status));
        emit(prefix + ".samples", std::to_string(m.samples));
        emit(prefix + ".max_dev", format_double(m.max_dev));
        emit(prefix + ".mean_dev", format_double(m.mean_dev));
        emit(prefix + ".windward_mean", format_double(m.windward_mean));
        emit(prefix + ".leeward_mean", format_double(m.leeward_mean));
        emit(prefix + ".above_mean", format_double(m.above_mean));
        emit(prefix + ".below_mean", format_double(m.below_mean));
    };
    arm("cfd", r.cfd_metrics);
    arm("baseline", r.baseline_metrics);
    emit("cfd.leeward_minus_windward",
         format_double(r.cfd_metrics.leeward_mean - r.cfd_metrics.windward_mean));
    emit("baseline.leeward_minus_windward",
         format_double(r.baseline_metrics.leeward_mean - r.baseline_metrics.windward_mean));
    const auto ratio = [](const DeviationMetrics& m) {
        return m.below_mean > 0.0 ? m.above_mean / m.below_mean
                                  : std::numeric_limits<double>::infinity();
    };
    emit("cfd.above_below_ratio", format_double(ratio(r.cfd_metrics)));
    emit("baseline.above_below_ratio", format_double(ratio(r.baseline_metrics)));
}

} // namespace windsim
