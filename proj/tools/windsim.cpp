// windsim command-line front end.
//
// Subcommands: scan, solve, index, fly, scenario, bench. Stage artifacts are
// files so pipelines can be resumed and inspected; every command writes a
// manifest with input hashes and stage times next to its outputs.
//
// Exit codes: 0 success, 2 validation/parse failure, 3 I/O failure,
// 4 solver did not converge (outputs are still written).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "windsim/dronesim.hpp"
#include "windsim/geometry.hpp"
#include "windsim/manifest.hpp"
#include "windsim/scenarios.hpp"
#include "windsim/voxelizer.hpp"
#include "windsim/windfield.hpp"
#include "windsim/windsolver.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNotConverged = 4;

struct ScanArgs {
    std::string scene_path;
    std::vector<double> origin{0.0, 0.0, 0.0};
    std::vector<int> cells{32, 32, 32};
    double cell_size = 1.0;
    std::string out_path;
    bool text = false;
    bool single_direction = false;
};

int cmd_scan(const ScanArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "scan";
    manifest.add_input(args.scene_path);

    const windsim::Scene scene = windsim::load_scene(args.scene_path);
    windsim::ScanRange range;
    range.origin = {args.origin[0], args.origin[1], args.origin[2]};
    range.nx = args.cells[0];
    range.ny = args.cells[1];
    range.nz = args.cells[2];
    range.cell_size = args.cell_size;
    range.validate();

    windsim::OccupancyGrid grid(range);
    {
        windsim::StageTimer t(manifest, "scan");
        grid = windsim::scan_terrain(scene, range, !args.single_direction);
    }
    windsim::export_grid(grid, args.out_path);
    manifest.outputs.push_back(args.out_path);
    if (args.text) {
        std::ofstream text_out(args.out_path + ".txt");
        windsim::export_grid_text(grid, text_out);
        manifest.outputs.push_back(args.out_path + ".txt");
    }
    manifest.config_echo = {{"origin", args.origin},
                            {"cells", args.cells},
                            {"cell_size", args.cell_size},
                            {"occupied", grid.occupied_count()}};
    manifest.write(args.out_path + ".manifest.json");
    std::printf("scan: %zu of %zu cells occupied -> %s\n", grid.occupied_count(),
                range.cell_count(), args.out_path.c_str());
    return kExitOk;
}

struct SolveArgs {
    std::string grid_path;
    std::string wind_path;
    std::string out_path;
    std::string csv_path;
};

int cmd_solve(const SolveArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "solve";
    manifest.add_input(args.grid_path);
    manifest.add_input(args.wind_path);

    const windsim::OccupancyGrid grid = windsim::import_grid(args.grid_path);
    const windsim::WindConfig config = windsim::load_wind_config(args.wind_path);
    windsim::WindField field;
    {
        windsim::StageTimer t(manifest, "solve");
        field = windsim::solve_wind(grid, config);
    }
    windsim::save_field(field, args.out_path);
    manifest.outputs.push_back(args.out_path);
    if (!args.csv_path.empty()) {
        std::ofstream csv(args.csv_path, std::ios::binary);
        if (!csv)
            throw windsim::IoError("cannot write field csv: " + args.csv_path);
        windsim::export_field_csv(field, csv);
        manifest.outputs.push_back(args.csv_path);
    }
    manifest.config_echo = config.to_json();
    manifest.config_echo["converged"] = field.converged;
    manifest.config_echo["final_residual"] = field.final_residual;
    manifest.write(args.out_path + ".manifest.json");
    std::printf("solve: %s, residual %.3e 1/s -> %s\n",
                field.converged ? "converged" : "NOT converged", field.final_residual,
                args.out_path.c_str());
    return field.converged ? kExitOk : kExitNotConverged;
}

struct IndexArgs {
    std::string field_path;
    std::string out_path;
};

int cmd_index(const IndexArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "index";
    manifest.add_input(args.field_path);

    const windsim::WindField field = windsim::load_field(args.field_path);
    windsim::WindIndex index;
    {
        windsim::StageTimer t(manifest, "index");
        index = windsim::build_index(field);
    }
    windsim::save_index(index, args.out_path);
    manifest.outputs.push_back(args.out_path);
    manifest.config_echo = {{"entries", index.entry_count()}, {"depth", index.depth()}};
    manifest.write(args.out_path + ".manifest.json");
    std::printf("index: %zu entries, depth %d -> %s\n", index.entry_count(), index.depth(),
                args.out_path.c_str());
    return kExitOk;
}

struct FlyArgs {
    std::string index_path;
    std::string plan_path;
    std::string out_path;
    std::uint64_t seed = 42;
    double dt = 0.02;
    double timeout = 120.0;
    double ground_z = 0.0;
    double air_density = 1.225;
};

int cmd_fly(const FlyArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "fly";
    manifest.add_input(args.index_path);
    manifest.add_input(args.plan_path);

    const windsim::WindIndex index = windsim::load_index(args.index_path);
    const windsim::FlightPlan plan = windsim::load_flight_plan(args.plan_path);
    windsim::Trajectory traj;
    {
        windsim::StageTimer t(manifest, "fly");
        traj = windsim::run_flight(plan, index, windsim::DroneParams{}, args.seed, args.dt,
                                   args.timeout, args.ground_z, args.air_density);
    }
    windsim::write_trajectory_csv(traj, fs::path(args.out_path));
    manifest.outputs.push_back(args.out_path);
    manifest.config_echo = {{"seed", args.seed},
                            {"dt", args.dt},
                            {"timeout", args.timeout},
                            {"status", windsim::status_name(traj.terminal)}};
    manifest.write(args.out_path + ".manifest.json");
    std::printf("fly: %s after %zu steps -> %s\n", windsim::status_name(traj.terminal),
                traj.samples.size(), args.out_path.c_str());
    return kExitOk;
}

struct ScenarioArgs {
    std::string spec_path;
    std::string out_dir;
    bool save_field = false;
};

int cmd_scenario(const ScenarioArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "scenario";
    manifest.add_input(args.spec_path);

    const windsim::ScenarioSpec spec = windsim::load_scenario_spec(args.spec_path);
    fs::create_directories(args.out_dir);

    windsim::OccupancyGrid grid(spec.range);
    {
        windsim::StageTimer t(manifest, "scan");
        grid = windsim::scan_terrain(spec.scene, spec.range);
    }
    windsim::WindField field;
    {
        windsim::StageTimer t(manifest, "solve");
        field = windsim::solve_wind(grid, spec.wind);
    }
    windsim::ScenarioResult result;
    {
        windsim::StageTimer t(manifest, "fly");
        result = windsim::run_scenario_with_field(spec, grid, field);
    }

    const fs::path dir(args.out_dir);
    windsim::write_trajectory_csv(result.cfd_trajectory, dir / "cfd_trajectory.csv");
    windsim::write_trajectory_csv(result.baseline_trajectory, dir / "baseline_trajectory.csv");
    {
        std::ofstream metrics(dir / "metrics.txt", std::ios::binary);
        if (!metrics)
            throw windsim::IoError("cannot write metrics file");
        windsim::write_metrics(result, spec.name, metrics);
    }
    manifest.outputs.push_back((dir / "cfd_trajectory.csv").string());
    manifest.outputs.push_back((dir / "baseline_trajectory.csv").string());
    manifest.outputs.push_back((dir / "metrics.txt").string());
    if (args.save_field) {
        windsim::save_field(field, dir / "wind_field.bin");
        manifest.outputs.push_back((dir / "wind_field.bin").string());
    }
    manifest.config_echo = {{"scenario", spec.name},
                            {"seed", spec.seed},
                            {"converged", result.solver_converged},
                            {"residual", result.solver_residual}};
    manifest.write(dir / "manifest.json");
    std::printf("scenario %s: cfd %s (mean dev %.2f m), baseline %s (mean dev %.2f m)\n",
                spec.name.c_str(), windsim::status_name(result.cfd_metrics.status),
                result.cfd_metrics.mean_dev,
                windsim::status_name(result.baseline_metrics.status),
                result.baseline_metrics.mean_dev);
    return result.solver_converged ? kExitOk : kExitNotConverged;
}

struct BenchArgs {
    std::vector<int> sizes;
    std::string scene_path;
    std::string wind_path;
    std::string out_path = "bench.csv";
};

int cmd_bench(const BenchArgs& args)
{
    windsim::RunManifest manifest;
    manifest.command = "bench";

    windsim::Scene scene;
    if (args.scene_path.empty()) {
        scene = windsim::tower_scene();
    } else {
        manifest.add_input(args.scene_path);
        scene = windsim::load_scene(args.scene_path);
    }
    windsim::WindConfig config;
    if (args.wind_path.empty()) {
        // Bench default: fixed moderate workload so timings compare across
        // sizes rather than across convergence histories.
        config.sources.push_back({windsim::BoundaryFace::XPos, 10.0, windsim::WindKind::Normal, 0.0});
        config.solver.max_iterations = 150;
        config.solver.pressure_iterations = 24;
        config.solver.final_pressure_iterations = 2000;
    } else {
        manifest.add_input(args.wind_path);
        config = windsim::load_wind_config(args.wind_path);
    }

    std::vector<windsim::ScanRange> ranges;
    for (int n : args.sizes) {
        if (n < 4)
            throw windsim::ValidationError("bench: sizes must be >= 4");
        ranges.push_back(windsim::centered_range(scene, n));
    }
    std::vector<windsim::BenchRow> rows;
    {
        windsim::StageTimer t(manifest, "bench");
        rows = windsim::benchmark_pipeline(scene, config, ranges);
    }
    {
        std::ofstream out(args.out_path, std::ios::binary);
        if (!out)
            throw windsim::IoError("cannot write bench csv: " + args.out_path);
        windsim::write_bench_csv(rows, out);
    }
    manifest.outputs.push_back(args.out_path);
    manifest.config_echo = config.to_json();
    manifest.write(args.out_path + ".manifest.json");
    for (const auto& r : rows)
        std::printf("bench %3dx%3dx%3d: scan %8.4f s, solve+index %8.3f s\n", r.nx, r.ny,
                    r.nz, r.scan_seconds, r.solve_index_seconds);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"windsim: voxel terrain scanning, wind-field computation and "
                 "wind-aware drone flight simulation"};
    app.require_subcommand(1);

    ScanArgs scan_args;
    auto* scan = app.add_subcommand("scan", "Voxelize a scene into an occupancy grid");
    scan->add_option("--scene", scan_args.scene_path, "Scene JSON file")->required();
    scan->add_option("--origin", scan_args.origin, "Grid origin x y z (m)")->expected(3);
    scan->add_option("--cells", scan_args.cells, "Cell counts nx ny nz")->expected(3);
    scan->add_option("--cell-size", scan_args.cell_size, "Cell edge length (m), default 1");
    scan->add_option("--out", scan_args.out_path, "Output grid file")->required();
    scan->add_flag("--text", scan_args.text, "Also write a text dump");
    scan->add_flag("--single-direction", scan_args.single_direction,
                   "Trace one ray per face pair instead of two");

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Compute the wind field for a grid");
    solve->add_option("--grid", solve_args.grid_path, "Occupancy grid file")->required();
    solve->add_option("--wind", solve_args.wind_path, "Wind config JSON")->required();
    solve->add_option("--out", solve_args.out_path, "Output field file")->required();
    solve->add_option("--csv", solve_args.csv_path, "Optional CSV dump of the field");

    IndexArgs index_args;
    auto* index = app.add_subcommand("index", "Build the wind-lookup index from a field");
    index->add_option("--field", index_args.field_path, "Wind field file")->required();
    index->add_option("--out", index_args.out_path, "Output index file")->required();

    FlyArgs fly_args;
    auto* fly = app.add_subcommand("fly", "Fly a plan through an indexed wind field");
    fly->add_option("--index", fly_args.index_path, "Wind index file")->required();
    fly->add_option("--plan", fly_args.plan_path, "Flight plan JSON")->required();
    fly->add_option("--out", fly_args.out_path, "Output trajectory CSV")->required();
    fly->add_option("--seed", fly_args.seed, "Fluctuation seed, default 42");
    fly->add_option("--dt", fly_args.dt, "Timestep (s), default 0.02");
    fly->add_option("--timeout", fly_args.timeout, "Flight timeout (s), default 120");
    fly->add_option("--ground", fly_args.ground_z, "Ground elevation (m), default 0");
    fly->add_option("--air-density", fly_args.air_density, "Air density (kg/m^3)");

    ScenarioArgs scenario_args;
    auto* scenario = app.add_subcommand(
        "scenario", "Run a paired solved-field vs uniform-wind comparison");
    scenario->add_option("--spec", scenario_args.spec_path, "Scenario spec JSON")->required();
    scenario->add_option("--out", scenario_args.out_dir, "Output directory")->required();
    scenario->add_flag("--save-field", scenario_args.save_field,
                       "Also write the solved wind field");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time scan vs solve across grid sizes");
    bench->add_option("sizes", bench_args.sizes, "Cube edge sizes, e.g. 32 48 64")
        ->required()
        ->expected(-1);
    bench->add_option("--scene", bench_args.scene_path,
                      "Scene JSON (default: built-in tower fixture)");
    bench->add_option("--wind", bench_args.wind_path,
                      "Wind config JSON (default: capped bench config)");
    bench->add_option("--out", bench_args.out_path, "Output CSV, default bench.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*scan)
            return cmd_scan(scan_args);
        if (*solve)
            return cmd_solve(solve_args);
        if (*index)
            return cmd_index(index_args);
        if (*fly)
            return cmd_fly(fly_args);
        if (*scenario)
            return cmd_scenario(scenario_args);
        if (*bench)
            return cmd_bench(bench_args);
    } catch (const windsim::ParseError& e) {
        std::fprintf(stderr, "windsim: parse error: %s\n", e.what());
        return kExitValidation;
    } catch (const windsim::ValidationError& e) {
        std::fprintf(stderr, "windsim: validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const windsim::IoError& e) {
        std::fprintf(stderr, "windsim: io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "windsim: error: %s\n", e.what());
        return kExitIo;
    }
    return kExitOk;
}
