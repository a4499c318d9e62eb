#pragma once

// Steady incompressible wind solve on the occupancy grid.
//
// Scheme: pseudo-time stepping of a Chorin-style projection method on a
// collocated uniform grid. Each step advects (first-order upwind), diffuses
// (explicit, effective viscosity) and projects. The projection relaxes a
// pressure field with damped Jacobi sweeps until the wide central-difference
// divergence of the corrected velocity is below target; that is the same
// discrete operator `divergence()` reports, so a converged field satisfies
// the diagnostic by construction. Jacobi keeps updates order-independent,
// which preserves mirror symmetry and makes runs bitwise reproducible.
// Fields are stored with a one-cell ghost layer refreshed from the boundary
// rules before every stencil pass, so the sweeps are uniform over the domain.
//
// Boundary conditions: each wind source occupies one lateral boundary face
// as an inflow with a fixed velocity directed into the domain ("wind from
// the east" enters at the +x face moving in -x). The face opposite an inflow
// is a zero-gradient outflow with p = 0; when two opposing faces are both
// inflows the remaining lateral faces become outflows. Other lateral faces
// and the top are free-slip. The bottom is free-slip by default so that an
// obstacle-free domain reproduces the inflow exactly; a no_slip ground is
// available via WindConfig. Occupied cells hold zero velocity and act as
// no-slip walls; pressure sees them as Neumann mirrors.
//
// Turbulent sources contribute their mean speed here; the fluctuation
// percentage is applied at query time by the wind index.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "windsim/common.hpp"
#include "windsim/voxelizer.hpp"

namespace windsim {

enum class BoundaryFace : int { XNeg = 0, XPos = 1, YNeg = 2, YPos = 3 };

inline BoundaryFace opposite_face(BoundaryFace f)
{
    switch (f) {
    case BoundaryFace::XNeg: return BoundaryFace::XPos;
    case BoundaryFace::XPos: return BoundaryFace::XNeg;
    case BoundaryFace::YNeg: return BoundaryFace::YPos;
    default: return BoundaryFace::YNeg;
    }
}

// Unit direction of flow entering the domain through a face.
inline Vec3 inflow_direction(BoundaryFace f)
{
    switch (f) {
    case BoundaryFace::XNeg: return {1, 0, 0};
    case BoundaryFace::XPos: return {-1, 0, 0};
    case BoundaryFace::YNeg: return {0, 1, 0};
    default: return {0, -1, 0};
    }
}

enum class WindKind { Normal, Turbulent };
enum class GroundCondition { FreeSlip, NoSlip };

struct WindSource {
    BoundaryFace face = BoundaryFace::XPos;
    double speed = 0.0;
    WindKind kind = WindKind::Normal;
    double fluctuation = 0.0; // fraction in [0,1); only meaningful for turbulent

    Vec3 mean_velocity() const { return inflow_direction(face) * speed; }
};

// Compass name of the side the wind blows FROM. "east" is the +x boundary
// face, wind directed -x.
inline BoundaryFace face_from_name(const std::string& name)
{
    if (name == "east" || name == "+x") return BoundaryFace::XPos;
    if (name == "west" || name == "-x") return BoundaryFace::XNeg;
    if (name == "north" || name == "+y") return BoundaryFace::YPos;
    if (name == "south" || name == "-y") return BoundaryFace::YNeg;
    throw ParseError("unknown wind source face '" + name +
                     "' (expected east/west/north/south)");
}

inline const char* face_name(BoundaryFace f)
{
    switch (f) {
    case BoundaryFace::XPos: return "east";
    case BoundaryFace::XNeg: return "west";
    case BoundaryFace::YPos: return "north";
    default: return "south";
    }
}

struct SolverSettings {
    int max_iterations = 2500;          // outer pseudo-time steps
    double divergence_tolerance = 0.0;  // 1/s; <= 0 selects 1e-4 * inflow / cell_size
    double relaxation = 0.8;            // Jacobi damping for the pressure sweeps
    int pressure_iterations = 24;       // Jacobi sweeps per pseudo-time step
    int final_pressure_iterations = 8000; // budget for the closing tight projection
    double steady_tolerance = 1e-4;     // per-step velocity delta, relative to inflow
};

struct WindConfig {
    std::vector<WindSource> sources;
    double air_density = 1.225;          // kg/m^3
    double kinematic_viscosity = 1.5e-5; // m^2/s (air); recorded, not used directly
    double effective_viscosity = 1.0;    // m^2/s; numerical-stability override
    GroundCondition ground = GroundCondition::FreeSlip;
    SolverSettings solver;

    void validate() const;
    Vec3 combined_mean_velocity() const
    {
        Vec3 v{};
        for (const WindSource& s : sources)
            v += s.mean_velocity();
        return v;
    }
    double max_source_speed() const
    {
        double m = 0.0;
        for (const WindSource& s : sources)
            m = std::max(m, s.speed);
        return m;
    }
    // Shared fluctuation amplitude: the largest fluctuation among turbulent
    // sources. The steady solve merges sources into one field, so a single
    // factor is applied at query time (documented limitation for configs
    // with several turbulent sources).
    double turbulence_amplitude() const
    {
        double a = 0.0;
        for (const WindSource& s : sources)
            if (s.kind == WindKind::Turbulent)
                a = std::max(a, s.fluctuation);
        return a;
    }
    nlohmann::json to_json() const;
    std::uint64_t hash() const { return fnv1a64(to_json().dump()); }
};

struct WindField {
    OccupancyGrid grid;
    std::vector<Vec3> velocity; // one entry per cell, zero at occupied cells
    bool converged = false;
    double final_residual = 0.0; // max |divergence| over empty interior cells, 1/s
    std::uint64_t config_hash = 0;
    double turbulence_amplitude = 0.0;

    const ScanRange& range() const { return grid.range(); }
    const Vec3& at(int i, int j, int k) const
    {
        return velocity[grid.range().linear(i, j, k)];
    }
    std::size_t empty_cell_count() const
    {
        return grid.range().cell_count() - grid.occupied_count();
    }
};

// ---------------------------------------------------------------------------
// Config validation and JSON form
// ---------------------------------------------------------------------------

inline void WindConfig::validate() const
{
    if (sources.empty())
        throw ValidationError("wind config: at least one source required");
    std::array<bool, 4> seen{};
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const WindSource& s = sources[i];
        if (!(s.speed > 0.0))
            throw ValidationError("wind config: sources[" + std::to_string(i) +
                                  "].speed must be > 0");
        if (s.fluctuation < 0.0 || s.fluctuation >= 1.0)
            throw ValidationError("wind config: sources[" + std::to_string(i) +
                                  "].fluctuation must be in [0,1)");
        if (seen[int(s.face)])
            throw ValidationError(std::string("wind config: more than one source on the ") +
                                  face_name(s.face) + " face");
        seen[int(s.face)] = true;
    }
    if (seen[0] && seen[1] && seen[2] && seen[3])
        throw ValidationError("wind config: all four lateral faces are inflows, "
                              "no outflow face remains");
    if (!(air_density > 0.0))
        throw ValidationError("wind config: air_density must be > 0");
    if (kinematic_viscosity < 0.0 || effective_viscosity < 0.0)
        throw ValidationError("wind config: viscosity must be >= 0");
    if (solver.max_iterations < 1)
        throw ValidationError("wind config: solver.max_iterations must be >= 1");
    if (solver.pressure_iterations < 1)
        throw ValidationError("wind config: solver.pressure_iterations must be >= 1");
    if (!(solver.relaxation > 0.0) || solver.relaxation > 1.5)
        throw ValidationError("wind config: solver.relaxation must be in (0, 1.5]");
    if (solver.steady_tolerance <= 0.0)
        throw ValidationError("wind config: solver.steady_tolerance must be > 0");
}

inline nlohmann::json WindConfig::to_json() const
{
    nlohmann::json j;
    j["sources"] = nlohmann::json::array();
    for (const WindSource& s : sources) {
        nlohmann::json js;
        js["from"] = face_name(s.face);
        js["speed"] = s.speed;
        js["kind"] = s.kind == WindKind::Turbulent ? "turbulent" : "normal";
        js["fluctuation"] = s.fluctuation;
        j["sources"].push_back(js);
    }
    j["air_density"] = air_density;
    j["kinematic_viscosity"] = kinematic_viscosity;
    j["effective_viscosity"] = effective_viscosity;
    j["ground"] = ground == GroundCondition::NoSlip ? "no_slip" : "free_slip";
    j["solver"] = {{"max_iterations", solver.max_iterations},
                   {"divergence_tolerance", solver.divergence_tolerance},
                   {"relaxation", solver.relaxation},
                   {"pressure_iterations", solver.pressure_iterations},
                   {"final_pressure_iterations", solver.final_pressure_iterations},
                   {"steady_tolerance", solver.steady_tolerance}};
    return j;
}

inline WindConfig wind_config_from_json(const nlohmann::json& j,
                                        const std::string& source = "wind config")
{
    if (!j.is_object() || !j.contains("sources") || !j["sources"].is_array())
        throw ParseError(source + ": expected object with a 'sources' list");
    WindConfig cfg;
    for (const auto& js : j["sources"]) {
        const std::string what = source + ": sources[" +
                                 std::to_string(cfg.sources.size()) + "]";
        if (!js.is_object() || !js.contains("from") || !js.contains("speed"))
            throw ParseError(what + ": expected object with 'from' and 'speed'");
        WindSource s;
        s.face = face_from_name(js["from"].get<std::string>());
        s.speed = js["speed"].get<double>();
        if (js.contains("kind")) {
            const std::string k = js["kind"].get<std::string>();
            if (k == "normal")
                s.kind = WindKind::Normal;
            else if (k == "turbulent")
                s.kind = WindKind::Turbulent;
            else
                throw ParseError(what + ": unknown kind '" + k + "'");
        }
        if (js.contains("fluctuation"))
            s.fluctuation = js["fluctuation"].get<double>();
        cfg.sources.push_back(s);
    }
    if (j.contains("air_density"))
        cfg.air_density = j["air_density"].get<double>();
    if (j.contains("kinematic_viscosity"))
        cfg.kinematic_viscosity = j["kinematic_viscosity"].get<double>();
    if (j.contains("effective_viscosity"))
        cfg.effective_viscosity = j["effective_viscosity"].get<double>();
    if (j.contains("ground")) {
        const std::string g = j["ground"].get<std::string>();
        if (g == "no_slip")
            cfg.ground = GroundCondition::NoSlip;
        else if (g == "free_slip")
            cfg.ground = GroundCondition::FreeSlip;
        else
            throw ParseError(source + ": unknown ground condition '" + g + "'");
    }
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        if (s.contains("max_iterations"))
            cfg.solver.max_iterations = s["max_iterations"].get<int>();
        if (s.contains("divergence_tolerance"))
            cfg.solver.divergence_tolerance = s["divergence_tolerance"].get<double>();
        if (s.contains("relaxation"))
            cfg.solver.relaxation = s["relaxation"].get<double>();
        if (s.contains("pressure_iterations"))
            cfg.solver.pressure_iterations = s["pressure_iterations"].get<int>();
        if (s.contains("final_pressure_iterations"))
            cfg.solver.final_pressure_iterations = s["final_pressure_iterations"].get<int>();
        if (s.contains("steady_tolerance"))
            cfg.solver.steady_tolerance = s["steady_tolerance"].get<double>();
    }
    cfg.validate();
    return cfg;
}

inline WindConfig load_wind_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("wind config file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return wind_config_from_json(j, path.string());
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

namespace detail {

enum class FaceRole { Inflow, Outflow, FreeSlip };

struct LateralFaces {
    std::array<FaceRole, 4> role{};
    std::array<Vec3, 4> inflow{};
};

inline LateralFaces assign_face_roles(const std::vector<WindSource>& sources)
{
    LateralFaces f;
    f.role.fill(FaceRole::FreeSlip);
    for (const WindSource& s : sources) {
        f.role[int(s.face)] = FaceRole::Inflow;
        f.inflow[int(s.face)] = s.mean_velocity();
    }
    for (const WindSource& s : sources) {
        const BoundaryFace opp = opposite_face(s.face);
        if (f.role[int(opp)] == FaceRole::FreeSlip)
            f.role[int(opp)] = FaceRole::Outflow;
    }
    const bool x_pair = f.role[0] == FaceRole::Inflow && f.role[1] == FaceRole::Inflow;
    const bool y_pair = f.role[2] == FaceRole::Inflow && f.role[3] == FaceRole::Inflow;
    if (x_pair || y_pair)
        for (auto& r : f.role)
            if (r == FaceRole::FreeSlip)
                r = FaceRole::Outflow;
    bool any_out = false;
    for (auto r : f.role)
        any_out |= (r == FaceRole::Outflow);
    if (!any_out)
        throw ValidationError("wind config: no outflow face remains");
    return f;
}

class ProjectionSolver {
public:
    ProjectionSolver(const OccupancyGrid& grid, const WindConfig& cfg)
        : grid_(grid), cfg_(cfg), nx_(grid.range().nx), ny_(grid.range().ny),
          nz_(grid.range().nz), h_(grid.range().cell_size),
          sx_(nx_ + 2), sy_(ny_ + 2), sz_(nz_ + 2),
          np_(std::size_t(sx_) * std::size_t(sy_) * std::size_t(sz_)),
          faces_(assign_face_roles(cfg.sources))
    {
        cfg_.validate();
        solid_.assign(np_, 0);
        std::size_t solid_count = 0;
        int k_top = -1;
        for (int k = 0; k < nz_; ++k)
            for (int j = 0; j < ny_; ++j)
                for (int i = 0; i < nx_; ++i)
                    if (grid.occupied(i, j, k)) {
                        solid_[at(i, j, k)] = 1;
                        ++solid_count;
                        k_top = std::max(k_top, k);
                    }
        if (solid_count == grid.range().cell_count())
            throw ValidationError("no fluid cells: grid is fully occupied");
        if (k_top >= 0 && 2 * (k_top + 1) > nz_)
            std::fprintf(stderr,
                         "windsim: warning: domain height %d cells is less than twice the "
                         "tallest obstacle (%d cells); top-boundary blockage may inflate "
                         "roof-level speeds\n",
                         nz_, k_top + 1);

        u_ref_ = cfg_.max_source_speed();
        tol_ = cfg_.solver.divergence_tolerance > 0.0
                   ? cfg_.solver.divergence_tolerance
                   : 1e-4 * u_ref_ / h_;
        u_.assign(np_, Vec3{});
        uprev_.assign(np_, Vec3{});
        ustar_.assign(np_, Vec3{});
        grad_.assign(np_, Vec3{});
        p_.assign(np_, 0.0);
        dvg_.assign(np_, 0.0);
    }

    WindField run()
    {
        const Vec3 init = cfg_.combined_mean_velocity();
        for_each_cell([&](std::size_t c) { u_[c] = solid_[c] ? Vec3{} : init; });

        double dt = cfl_dt();
        bool steady = false;
        const bool trace = std::getenv("WINDSIM_SOLVER_TRACE") != nullptr;
        for (int it = 0; it < cfg_.solver.max_iterations; ++it) {
            dt = cfl_dt();
            uprev_ = u_;
            advect_diffuse(dt);
            const double maxd = project(dt, cfg_.solver.pressure_iterations, 0.25 * tol_);
            double delta = 0.0;
            for_each_cell([&](std::size_t c) {
                delta = std::max(delta, std::abs(u_[c].x - uprev_[c].x));
                delta = std::max(delta, std::abs(u_[c].y - uprev_[c].y));
                delta = std::max(delta, std::abs(u_[c].z - uprev_[c].z));
            });
            if (trace && it % 50 == 0)
                std::fprintf(stderr, "windsim: solver it=%d dt=%.4f delta=%.3e div=%.3e\n",
                             it, dt, delta, maxd);
            if (delta <= cfg_.solver.steady_tolerance * u_ref_) {
                steady = true;
                break;
            }
        }

        double residual;
        if (steady) {
            // Tighten the divergence on the settled field.
            ustar_ = u_;
            residual = project(dt, cfg_.solver.final_pressure_iterations, 0.5 * tol_);
        } else {
            fill_velocity_ghosts(u_, false);
            compute_divergence(u_, dvg_);
            residual = interior_max(dvg_);
        }

        WindField field;
        field.grid = grid_;
        field.velocity.assign(grid_.range().cell_count(), Vec3{});
        for (int k = 0; k < nz_; ++k)
            for (int j = 0; j < ny_; ++j)
                for (int i = 0; i < nx_; ++i)
                    field.velocity[grid_.range().linear(i, j, k)] = u_[at(i, j, k)];
        field.final_residual = residual;
        field.converged = steady && residual <= tol_;
        field.config_hash = cfg_.hash();
        field.turbulence_amplitude = cfg_.turbulence_amplitude();
        return field;
    }

    double tolerance() const { return tol_; }

private:
    // Padded index; accepts -1..n on each axis.
    std::size_t at(int i, int j, int k) const
    {
        return (std::size_t(k + 1) * std::size_t(sy_) + std::size_t(j + 1)) *
                   std::size_t(sx_) +
               std::size_t(i + 1);
    }

    template <typename F>
    void for_each_cell(F&& f) const
    {
        for (int k = 0; k < nz_; ++k)
            for (int j = 0; j < ny_; ++j) {
                std::size_t c = at(0, j, k);
                for (int i = 0; i < nx_; ++i, ++c)
                    f(c);
            }
    }

    FaceRole role(BoundaryFace f) const { return faces_.role[int(f)]; }

    // Refresh the ghost layer of a velocity-like field. `homogeneous` selects
    // the correction-field variant where inflow data is zero.
    void fill_velocity_ghosts(std::vector<Vec3>& f, bool homogeneous) const
    {
        auto lateral = [&](BoundaryFace face, int axis, int ghost_i, int cell_i) {
            const FaceRole r = faces_.role[int(face)];
            const Vec3 in = homogeneous ? Vec3{} : faces_.inflow[int(face)];
            const bool is_x = axis == 0;
            const int n1 = is_x ? ny_ : nx_;
            for (int k = 0; k < nz_; ++k)
                for (int q = 0; q < n1; ++q) {
                    const std::size_t g = is_x ? at(ghost_i, q, k) : at(q, ghost_i, k);
                    const std::size_t c = is_x ? at(cell_i, q, k) : at(q, cell_i, k);
                    switch (r) {
                    case FaceRole::Inflow: f[g] = in; break;
                    case FaceRole::Outflow: f[g] = f[c]; break;
                    default: {
                        Vec3 v = f[c];
                        v[axis] = -v[axis];
                        f[g] = v;
                    }
                    }
                }
        };
        lateral(BoundaryFace::XNeg, 0, -1, 0);
        lateral(BoundaryFace::XPos, 0, nx_, nx_ - 1);
        lateral(BoundaryFace::YNeg, 1, -1, 0);
        lateral(BoundaryFace::YPos, 1, ny_, ny_ - 1);
        const bool noslip = cfg_.ground == GroundCondition::NoSlip;
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) {
                Vec3 b = f[at(i, j, 0)];
                if (noslip)
                    b = -b;
                else
                    b.z = -b.z;
                f[at(i, j, -1)] = b;
                Vec3 t = f[at(i, j, nz_ - 1)];
                t.z = -t.z; // free-slip top
                f[at(i, j, nz_)] = t;
            }
    }

    void fill_pressure_ghosts(std::vector<double>& p) const
    {
        auto lateral = [&](BoundaryFace face, bool is_x, int ghost_i, int cell_i) {
            const bool dirichlet = faces_.role[int(face)] == FaceRole::Outflow;
            const int n1 = is_x ? ny_ : nx_;
            for (int k = 0; k < nz_; ++k)
                for (int q = 0; q < n1; ++q) {
                    const std::size_t g = is_x ? at(ghost_i, q, k) : at(q, ghost_i, k);
                    const std::size_t c = is_x ? at(cell_i, q, k) : at(q, cell_i, k);
                    p[g] = dirichlet ? -p[c] : p[c]; // p = 0 on outflow faces
                }
        };
        lateral(BoundaryFace::XNeg, true, -1, 0);
        lateral(BoundaryFace::XPos, true, nx_, nx_ - 1);
        lateral(BoundaryFace::YNeg, false, -1, 0);
        lateral(BoundaryFace::YPos, false, ny_, ny_ - 1);
        for (int j = 0; j < ny_; ++j)
            for (int i = 0; i < nx_; ++i) {
                p[at(i, j, -1)] = p[at(i, j, 0)];
                p[at(i, j, nz_)] = p[at(i, j, nz_ - 1)];
            }
    }

    // Wide central-difference divergence; callers refresh ghosts first.
    // Solid cells store zero velocity, so no masking is needed.
    void compute_divergence(const std::vector<Vec3>& f, std::vector<double>& out) const
    {
        const double inv2h = 1.0 / (2.0 * h_);
        const std::size_t dy = std::size_t(sx_);
        const std::size_t dz = std::size_t(sx_) * std::size_t(sy_);
        for_each_cell([&](std::size_t c) {
            out[c] = solid_[c] ? 0.0
                               : ((f[c + 1].x - f[c - 1].x) + (f[c + dy].y - f[c - dy].y) +
                                  (f[c + dz].z - f[c - dz].z)) *
                                     inv2h;
        });
    }

    // Wide pressure gradient with Neumann mirrors at solid neighbours.
    void compute_gradient()
    {
        fill_pressure_ghosts(p_);
        const double inv2h = 1.0 / (2.0 * h_);
        const std::size_t dy = std::size_t(sx_);
        const std::size_t dz = std::size_t(sx_) * std::size_t(sy_);
        for_each_cell([&](std::size_t c) {
            if (solid_[c]) {
                grad_[c] = Vec3{};
                return;
            }
            const double pc = p_[c];
            const double pxp = solid_[c + 1] ? pc : p_[c + 1];
            const double pxm = solid_[c - 1] ? pc : p_[c - 1];
            const double pyp = solid_[c + dy] ? pc : p_[c + dy];
            const double pym = solid_[c - dy] ? pc : p_[c - dy];
            const double pzp = solid_[c + dz] ? pc : p_[c + dz];
            const double pzm = solid_[c - dz] ? pc : p_[c - dz];
            grad_[c] = {(pxp - pxm) * inv2h, (pyp - pym) * inv2h, (pzp - pzm) * inv2h};
        });
    }

    double interior_max(const std::vector<double>& d) const
    {
        double m = 0.0;
        for (int k = 1; k + 1 < nz_; ++k)
            for (int j = 1; j + 1 < ny_; ++j) {
                std::size_t c = at(1, j, k);
                for (int i = 1; i + 1 < nx_; ++i, ++c)
                    if (!solid_[c])
                        m = std::max(m, std::abs(d[c]));
            }
        return m;
    }

    double cfl_dt() const
    {
        double umax = std::max(u_ref_, 1e-9);
        for_each_cell([&](std::size_t c) {
            umax = std::max(umax, std::abs(u_[c].x) + std::abs(u_[c].y) + std::abs(u_[c].z));
        });
        double dt = 0.45 * h_ / umax;
        if (cfg_.effective_viscosity > 0.0)
            dt = std::min(dt, 0.15 * h_ * h_ / cfg_.effective_viscosity);
        return dt;
    }

    void advect_diffuse(double dt)
    {
        fill_velocity_ghosts(u_, false);
        const double inv_h = 1.0 / h_;
        const double nu_h2 = cfg_.effective_viscosity / (h_ * h_);
        const std::size_t dy = std::size_t(sx_);
        const std::size_t dz = std::size_t(sx_) * std::size_t(sy_);
        const std::size_t off[3] = {1, dy, dz};
        for_each_cell([&](std::size_t c) {
            if (solid_[c]) {
                ustar_[c] = Vec3{};
                return;
            }
            const Vec3 uc = u_[c];
            Vec3 conv{};
            Vec3 lap{};
            for (int ax = 0; ax < 3; ++ax) {
                const Vec3& up = u_[c + off[ax]];
                const Vec3& um = u_[c - off[ax]];
                lap += up + um - 2.0 * uc;
                const double a = uc[ax];
                conv += (a > 0.0 ? uc - um : up - uc) * (a * inv_h);
            }
            ustar_[c] = uc + dt * (nu_h2 * lap - conv);
        });
    }

    // Relax pressure until the interior divergence of (ustar - dt grad p)
    // drops below `target` or the sweep budget runs out, then apply the
    // correction to u. Returns the achieved interior maximum |divergence|.
    double project(double dt, int max_sweeps, double target)
    {
        fill_velocity_ghosts(ustar_, false);
        compute_divergence(ustar_, dvg_);
        const double scale = cfg_.solver.relaxation * (2.0 * h_ * h_ / 3.0) / dt;
        const std::size_t dy = std::size_t(sx_);
        const std::size_t dz = std::size_t(sx_) * std::size_t(sy_);
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            compute_gradient();
            fill_velocity_ghosts(grad_, true);
            double maxd = 0.0;
            const double inv2h = 1.0 / (2.0 * h_);
            for (int k = 0; k < nz_; ++k) {
                const bool kin = k > 0 && k + 1 < nz_;
                for (int j = 0; j < ny_; ++j) {
                    const bool jin = kin && j > 0 && j + 1 < ny_;
                    std::size_t c = at(0, j, k);
                    for (int i = 0; i < nx_; ++i, ++c) {
                        if (solid_[c])
                            continue;
                        const double gd = ((grad_[c + 1].x - grad_[c - 1].x) +
                                           (grad_[c + dy].y - grad_[c - dy].y) +
                                           (grad_[c + dz].z - grad_[c - dz].z)) *
                                          inv2h;
                        const double d = dvg_[c] - dt * gd;
                        p_[c] -= scale * d;
                        if (jin && i > 0 && i + 1 < nx_)
                            maxd = std::max(maxd, std::abs(d));
                    }
                }
            }
            if (maxd <= target)
                break;
        }
        compute_gradient();
        for_each_cell([&](std::size_t c) {
            u_[c] = solid_[c] ? Vec3{} : ustar_[c] - dt * grad_[c];
        });
        fill_velocity_ghosts(u_, false);
        compute_divergence(u_, dvg_);
        return interior_max(dvg_);
    }

    OccupancyGrid grid_;
    WindConfig cfg_;
    int nx_, ny_, nz_;
    double h_;
    int sx_, sy_, sz_;
    std::size_t np_;
    LateralFaces faces_;
    double u_ref_ = 0.0;
    double tol_ = 0.0;
    std::vector<std::uint8_t> solid_;
    std::vector<Vec3> u_, uprev_, ustar_, grad_;
    std::vector<double> p_, dvg_;
};

} // namespace detail

inline WindField solve_wind(const OccupancyGrid& grid, const WindConfig& config)
{
    config.validate();
    grid.range().validate();
    detail::ProjectionSolver solver(grid, config);
    return solver.run();
}

// The divergence tolerance a config resolves to on a given grid.
inline double resolved_divergence_tolerance(const WindConfig& config, const ScanRange& range)
{
    return config.solver.divergence_tolerance > 0.0
               ? config.solver.divergence_tolerance
               : 1e-4 * config.max_source_speed() / range.cell_size;
}

// Central finite-difference divergence at a cell, one-sided at domain
// boundaries, with zero velocity at occupied neighbours. Errors on occupied
// or out-of-range cells.
inline double divergence(const WindField& field, int i, int j, int k)
{
    const ScanRange& r = field.range();
    if (!r.contains(i, j, k))
        throw ValidationError("divergence: cell out of range");
    if (field.grid.occupied(i, j, k))
        throw ValidationError("divergence: cell is occupied");
    const double h = r.cell_size;
    double d = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
        const int pi = i + (ax == 0), pj = j + (ax == 1), pk = k + (ax == 2);
        const int mi = i - (ax == 0), mj = j - (ax == 1), mk = k - (ax == 2);
        const bool has_p = r.contains(pi, pj, pk);
        const bool has_m = r.contains(mi, mj, mk);
        const double vp = has_p ? field.at(pi, pj, pk)[ax] : 0.0;
        const double vm = has_m ? field.at(mi, mj, mk)[ax] : 0.0;
        if (has_p && has_m)
            d += (vp - vm) / (2.0 * h);
        else if (has_p)
            d += (vp - field.at(i, j, k)[ax]) / h;
        else if (has_m)
            d += (field.at(i, j, k)[ax] - vm) / h;
    }
    return d;
}

// Volumetric flux (m^3/s) through the grid plane `axis = index`, summed over
// empty cells: normal velocity times cell face area.
inline double mass_flux(const WindField& field, int axis, int index)
{
    const ScanRange& r = field.range();
    if (axis < 0 || axis > 2)
        throw ValidationError("mass_flux: axis must be 0, 1 or 2");
    const int extent = axis == 0 ? r.nx : axis == 1 ? r.ny : r.nz;
    if (index < 0 || index >= extent)
        throw ValidationError("mass_flux: plane index out of range");
    const double area = r.cell_size * r.cell_size;
    double flux = 0.0;
    auto add = [&](int i, int j, int k) {
        if (!field.grid.occupied(i, j, k))
            flux += field.at(i, j, k)[axis] * area;
    };
    if (axis == 0) {
        for (int k = 0; k < r.nz; ++k)
            for (int j = 0; j < r.ny; ++j)
                add(index, j, k);
    } else if (axis == 1) {
        for (int k = 0; k < r.nz; ++k)
            for (int i = 0; i < r.nx; ++i)
                add(i, index, k);
    } else {
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                add(i, j, index);
    }
    return flux;
}

// ---------------------------------------------------------------------------
// Field file: magic, version, grid metadata, config hash, flags, occupied
// cell list, then one f64 velocity triple per empty cell in ascending
// (k, j, i) order.
// ---------------------------------------------------------------------------

inline constexpr char kFieldMagic[8] = {'W', 'S', 'I', 'M', 'F', 'L', 'D', '1'};
inline constexpr std::uint32_t kFieldVersion = 1;

inline void save_field(const WindField& field, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open field file for writing: " + path.string());
    out.write(kFieldMagic, sizeof kFieldMagic);
    write_pod(out, kFieldVersion);
    const ScanRange& r = field.range();
    write_pod(out, r.origin.x);
    write_pod(out, r.origin.y);
    write_pod(out, r.origin.z);
    write_pod(out, std::uint32_t(r.nx));
    write_pod(out, std::uint32_t(r.ny));
    write_pod(out, std::uint32_t(r.nz));
    write_pod(out, r.cell_size);
    write_pod(out, field.config_hash);
    write_pod(out, field.turbulence_amplitude);
    write_pod(out, std::uint8_t(field.converged ? 1 : 0));
    write_pod(out, field.final_residual);
    const auto cells = field.grid.occupied_cells();
    write_pod(out, std::uint64_t(cells.size()));
    for (const Cell& c : cells) {
        write_pod(out, std::uint32_t(c.i));
        write_pod(out, std::uint32_t(c.j));
        write_pod(out, std::uint32_t(c.k));
    }
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (!field.grid.occupied(i, j, k)) {
                    const Vec3& v = field.at(i, j, k);
                    write_pod(out, v.x);
                    write_pod(out, v.y);
                    write_pod(out, v.z);
                }
    if (!out)
        throw IoError("failed writing field file: " + path.string());
}

inline WindField load_field(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open field file: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic || std::string(magic, 8) != std::string(kFieldMagic, 8))
        throw ParseError(path.string() + ": bad magic, expected WSIMFLD1");
    std::uint32_t version = 0;
    read_pod(in, version, "field file");
    if (version != kFieldVersion)
        throw ParseError(path.string() + ": unsupported field version " +
                         std::to_string(version));
    ScanRange r;
    read_pod(in, r.origin.x, "field file");
    read_pod(in, r.origin.y, "field file");
    read_pod(in, r.origin.z, "field file");
    std::uint32_t nx = 0, ny = 0, nz = 0;
    read_pod(in, nx, "field file");
    read_pod(in, ny, "field file");
    read_pod(in, nz, "field file");
    read_pod(in, r.cell_size, "field file");
    r.nx = int(nx);
    r.ny = int(ny);
    r.nz = int(nz);
    r.validate();

    WindField field;
    read_pod(in, field.config_hash, "field file");
    read_pod(in, field.turbulence_amplitude, "field file");
    std::uint8_t conv = 0;
    read_pod(in, conv, "field file");
    field.converged = conv != 0;
    read_pod(in, field.final_residual, "field file");
    std::uint64_t count = 0;
    read_pod(in, count, "field file");
    field.grid = OccupancyGrid(r);
    for (std::uint64_t n = 0; n < count; ++n) {
        std::uint32_t i = 0, j = 0, k = 0;
        read_pod(in, i, "field file");
        read_pod(in, j, "field file");
        read_pod(in, k, "field file");
        if (!r.contains(int(i), int(j), int(k)))
            throw ParseError(path.string() + ": occupied cell out of range");
        field.grid.set_occupied(int(i), int(j), int(k));
    }
    field.velocity.assign(r.cell_count(), Vec3{});
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (!field.grid.occupied(i, j, k)) {
                    Vec3 v;
                    read_pod(in, v.x, "field file");
                    read_pod(in, v.y, "field file");
                    read_pod(in, v.z, "field file");
                    field.velocity[r.linear(i, j, k)] = v;
                }
    return field;
}

inline void export_field_csv(const WindField& field, std::ostream& out)
{
    const ScanRange& r = field.range();
    out << "x,y,z,ux,uy,uz,occupied\n";
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i) {
                const Vec3 c = r.cell_center(i, j, k);
                const Vec3& v = field.at(i, j, k);
                out << format_double(c.x) << ',' << format_double(c.y) << ','
                    << format_double(c.z) << ',' << format_double(v.x) << ','
                    << format_double(v.y) << ',' << format_double(v.z) << ','
                    << (field.grid.occupied(i, j, k) ? 1 : 0) << '\n';
            }
}

} // namespace windsim
