#pragma once

// Point-mass UAV with quadratic drag on the wind-relative velocity and a PD
// waypoint controller. Each simulation step queries the wind index at the
// current position, advances the turbulence factor, updates the controller
// and integrates with semi-implicit Euler. Gravity is applied by the
// integrator and compensated by the controller (hover assumption), so wind
// is the only uncommanded disturbance.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "windsim/common.hpp"
#include "windsim/vec3.hpp"
#include "windsim/windfield.hpp"

namespace windsim {

inline constexpr double kGravity = 9.81; // m/s^2

struct DroneParams {
    double mass = 1.5;             // kg
    double drag_coefficient = 1.0;
    double reference_area = 0.1;   // m^2
    double max_thrust_accel = 20.0; // m/s^2, must exceed gravity
    double max_speed = 15.0;       // m/s
    double kp = 2.0;               // position gain, 1/s^2
    double kd = 3.0;               // velocity gain, 1/s

    void validate() const
    {
        if (!(mass > 0.0) || !(drag_coefficient > 0.0) || !(reference_area > 0.0) ||
            !(max_thrust_accel > 0.0) || !(max_speed > 0.0) || !(kp > 0.0) || !(kd > 0.0))
            throw ValidationError("drone params: all parameters must be > 0");
        if (!(max_thrust_accel > kGravity))
            throw ValidationError("drone params: max_thrust_accel must exceed gravity "
                                  "(the drone must be able to hover)");
    }
};

struct DroneState {
    Vec3 position;
    Vec3 velocity;
    double time = 0.0;
};

enum class FlightStatus { Active, Completed, Crashed, Timeout };

inline const char* status_name(FlightStatus s)
{
    switch (s) {
    case FlightStatus::Active: return "active";
    case FlightStatus::Completed: return "completed";
    case FlightStatus::Crashed: return "crashed";
    default: return "timeout";
    }
}

struct FlightPlan {
    enum class Kind { Waypoints, Orbit, Takeoff };

    Kind kind = Kind::Waypoints;
    std::vector<Vec3> waypoints;   // Waypoints: the route; Takeoff: points after the climb
    Vec3 orbit_center;             // Orbit
    double orbit_radius = 0.0;     // m
    double angular_speed = 0.5;    // rad/s, used for pacing metadata only
    int laps = 1;
    Vec3 start;                    // Takeoff: liftoff point
    double takeoff_altitude = 0.0; // m, absolute target altitude
    double tolerance = 0.5;        // waypoint capture radius, m

    static constexpr int kOrbitSegments = 72; // waypoints per lap

    void validate() const
    {
        if (!(tolerance > 0.0))
            throw ValidationError("flight plan: tolerance must be > 0");
        switch (kind) {
        case Kind::Waypoints:
            if (waypoints.empty())
                throw ValidationError("flight plan: waypoint list is empty");
            for (const Vec3& w : waypoints)
                if (!finite(w))
                    throw ValidationError("flight plan: non-finite waypoint");
            break;
        case Kind::Orbit:
            if (!(orbit_radius > 0.0))
                throw ValidationError("flight plan: orbit radius must be > 0");
            if (laps < 1)
                throw ValidationError("flight plan: laps must be >= 1");
            if (!(angular_speed > 0.0))
                throw ValidationError("flight plan: angular_speed must be > 0");
            if (!finite(orbit_center))
                throw ValidationError("flight plan: non-finite orbit center");
            break;
        case Kind::Takeoff:
            if (!finite(start))
                throw ValidationError("flight plan: non-finite start");
            if (!(takeoff_altitude > start.z))
                throw ValidationError("flight plan: takeoff altitude must be above start");
            for (const Vec3& w : waypoints)
                if (!finite(w))
                    throw ValidationError("flight plan: non-finite waypoint");
            break;
        }
    }

    Vec3 orbit_point(int m) const
    {
        const double theta = 2.0 * std::numbers::pi * double(m) / double(kOrbitSegments);
        return {orbit_center.x + orbit_radius * std::cos(theta),
                orbit_center.y + orbit_radius * std::sin(theta), orbit_center.z};
    }

    Vec3 start_position() const
    {
        switch (kind) {
        case Kind::Waypoints: return waypoints.front();
        case Kind::Orbit: return orbit_point(0);
        default: return start;
        }
    }

    // Targets the controller chases, in order.
    std::vector<Vec3> expand() const
    {
        std::vector<Vec3> out;
        switch (kind) {
        case Kind::Waypoints:
            out = waypoints;
            break;
        case Kind::Orbit:
            for (int m = 1; m <= kOrbitSegments * laps; ++m)
                out.push_back(orbit_point(m));
            break;
        case Kind::Takeoff:
            out.push_back({start.x, start.y, takeoff_altitude});
            out.insert(out.end(), waypoints.begin(), waypoints.end());
            break;
        }
        return out;
    }

    // Geometric reference path used for cross-track deviation (one lap of the
    // closed circle for orbits).
    std::vector<Vec3> nominal_polyline() const
    {
        std::vector<Vec3> out;
        switch (kind) {
        case Kind::Waypoints:
            out = waypoints;
            break;
        case Kind::Orbit:
            for (int m = 0; m <= kOrbitSegments; ++m)
                out.push_back(orbit_point(m));
            break;
        case Kind::Takeoff:
            out.push_back(start);
            out.push_back({start.x, start.y, takeoff_altitude});
            out.insert(out.end(), waypoints.begin(), waypoints.end());
            break;
        }
        return out;
    }

    nlohmann::json to_json() const;
};

struct TrajectorySample {
    double t = 0.0;
    Vec3 position;
    Vec3 velocity;
    Vec3 wind;           // wind vector applied at this step (fluctuation included)
    Vec3 commanded_accel;
    FlightStatus status = FlightStatus::Active;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    FlightStatus terminal = FlightStatus::Active;
    double dt = 0.0;
};

// Quadratic drag on the relative velocity: F = 1/2 rho Cd A |w - v| (w - v).
inline Vec3 wind_force(const Vec3& wind, const Vec3& drone_velocity,
                       const DroneParams& params, double air_density)
{
    const Vec3 rel = wind - drone_velocity;
    return 0.5 * air_density * params.drag_coefficient * params.reference_area * norm(rel) *
           rel;
}

// PD acceleration toward the target plus gravity compensation. If the total
// exceeds the thrust budget the PD part is scaled back so |command| equals
// max_thrust_accel; the gravity term is preserved.
inline Vec3 controller_update(const DroneState& state, const Vec3& target,
                              const DroneParams& params)
{
    const Vec3 g_comp{0.0, 0.0, kGravity};
    Vec3 pd = params.kp * (target - state.position) - params.kd * state.velocity;
    const double total2 = norm2(g_comp + pd);
    const double max2 = params.max_thrust_accel * params.max_thrust_accel;
    if (total2 > max2) {
        // Largest s in [0,1] with |g + s*pd| = max: positive root of
        // s^2 |pd|^2 + 2 s (g.pd) + |g|^2 - max^2 = 0.
        const double a = norm2(pd);
        if (a > 0.0) {
            const double b = dot(g_comp, pd);
            const double cq = norm2(g_comp) - max2;
            const double disc = b * b - a * cq;
            const double s = disc > 0.0 ? (-b + std::sqrt(disc)) / a : 0.0;
            pd *= std::clamp(s, 0.0, 1.0);
        }
    }
    return g_comp + pd;
}

// Semi-implicit Euler with gravity applied and the speed clamp.
inline DroneState step(const DroneState& state, const Vec3& commanded_accel,
                       const Vec3& wind, const DroneParams& params, double dt,
                       double air_density = 1.225)
{
    if (!(dt > 0.0))
        throw ValidationError("step: dt must be > 0");
    const Vec3 accel = commanded_accel + wind_force(wind, state.velocity, params, air_density) /
                                             params.mass +
                       Vec3{0.0, 0.0, -kGravity};
    Vec3 v = state.velocity + accel * dt;
    const double speed = norm(v);
    if (speed > params.max_speed)
        v *= params.max_speed / speed;
    DroneState next{state.position + v * dt, v, state.time + dt};
    if (!finite(next.position) || !finite(next.velocity))
        throw Error("step: simulation produced a non-finite state");
    return next;
}

// Closed-loop flight. Each sample records the state at the start of a step
// together with the wind and command applied to it; the final row carries the
// terminal status. Fully determined by (plan, index, params, seed, dt).
inline Trajectory run_flight(const FlightPlan& plan, const WindIndex& index,
                             const DroneParams& params, std::uint64_t seed,
                             double dt = 0.02, double timeout = 120.0,
                             double ground_z = 0.0, double air_density = 1.225)
{
    plan.validate();
    params.validate();
    if (!(dt > 0.0))
        throw ValidationError("run_flight: dt must be > 0");
    if (!(timeout > 0.0))
        throw ValidationError("run_flight: timeout must be > 0");

    const std::vector<Vec3> targets = plan.expand();
    DroneState state{plan.start_position(), Vec3{}, 0.0};
    FluctuationState fluct = make_fluctuation(index, seed);

    Trajectory out;
    out.dt = dt;
    std::size_t next_target = 0;
    for (;;) {
        while (next_target < targets.size() &&
               norm(state.position - targets[next_target]) <= plan.tolerance)
            ++next_target;

        FlightStatus status = FlightStatus::Active;
        if (state.position.z < ground_z)
            status = FlightStatus::Crashed;
        else if (next_target >= targets.size())
            status = FlightStatus::Completed;
        else if (state.time >= timeout)
            status = FlightStatus::Timeout;

        const Vec3 wind = query_wind(index, state.position, state.time, &fluct);
        const Vec3 target = next_target < targets.size() ? targets[next_target]
                                                         : targets.back();
        const Vec3 cmd = controller_update(state, target, params);
        out.samples.push_back({state.time, state.position, state.velocity, wind, cmd, status});
        if (status != FlightStatus::Active) {
            out.terminal = status;
            break;
        }
        state = step(state, cmd, wind, params, dt, air_density);
        fluct = advance_fluctuation(fluct, dt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: one row per step, SI units.
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out)
{
    out << "t,x,y,z,vx,vy,vz,wx,wy,wz,ax_cmd,ay_cmd,az_cmd,status\n";
    for (const TrajectorySample& s : traj.samples) {
        out << format_double(s.t) << ',' << format_double(s.position.x) << ','
            << format_double(s.position.y) << ',' << format_double(s.position.z) << ','
            << format_double(s.velocity.x) << ',' << format_double(s.velocity.y) << ','
            << format_double(s.velocity.z) << ',' << format_double(s.wind.x) << ','
            << format_double(s.wind.y) << ',' << format_double(s.wind.z) << ','
            << format_double(s.commanded_accel.x) << ',' << format_double(s.commanded_accel.y)
            << ',' << format_double(s.commanded_accel.z) << ',' << status_name(s.status)
            << '\n';
    }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary); // binary: byte-identical across runs
    if (!out)
        throw IoError("cannot open trajectory file for writing: " + path.string());
    write_trajectory_csv(traj, out);
    if (!out)
        throw IoError("failed writing trajectory file: " + path.string());
}

// ---------------------------------------------------------------------------
// Plan JSON form
// ---------------------------------------------------------------------------

inline nlohmann::json FlightPlan::to_json() const
{
    nlohmann::json j;
    switch (kind) {
    case Kind::Waypoints: {
        j["kind"] = "waypoints";
        auto pts = nlohmann::json::array();
        for (const Vec3& w : waypoints)
            pts.push_back({w.x, w.y, w.z});
        j["points"] = pts;
        break;
    }
    case Kind::Orbit:
        j["kind"] = "orbit";
        j["center"] = {orbit_center.x, orbit_center.y, orbit_center.z};
        j["radius"] = orbit_radius;
        j["angular_speed"] = angular_speed;
        j["laps"] = laps;
        break;
    case Kind::Takeoff: {
        j["kind"] = "takeoff";
        j["start"] = {start.x, start.y, start.z};
        j["altitude"] = takeoff_altitude;
        auto pts = nlohmann::json::array();
        for (const Vec3& w : waypoints)
            pts.push_back({w.x, w.y, w.z});
        j["then"] = pts;
        break;
    }
    }
    j["tolerance"] = tolerance;
    return j;
}

inline FlightPlan flight_plan_from_json(const nlohmann::json& j,
                                        const std::string& source = "flight plan")
{
    if (!j.is_object() || !j.contains("kind"))
        throw ParseError(source + ": expected object with a 'kind'");
    FlightPlan plan;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "waypoints") {
        plan.kind = FlightPlan::Kind::Waypoints;
        if (!j.contains("points") || !j["points"].is_array())
            throw ParseError(source + ": waypoints plan needs a 'points' list");
        for (const auto& p : j["points"])
            plan.waypoints.push_back(detail::json_vec3(p, source + ".points"));
    } else if (kind == "orbit") {
        plan.kind = FlightPlan::Kind::Orbit;
        if (!j.contains("center") || !j.contains("radius"))
            throw ParseError(source + ": orbit plan needs 'center' and 'radius'");
        plan.orbit_center = detail::json_vec3(j["center"], source + ".center");
        plan.orbit_radius = j["radius"].get<double>();
        if (j.contains("angular_speed"))
            plan.angular_speed = j["angular_speed"].get<double>();
        if (j.contains("laps"))
            plan.laps = j["laps"].get<int>();
    } else if (kind == "takeoff") {
        plan.kind = FlightPlan::Kind::Takeoff;
        if (!j.contains("start") || !j.contains("altitude"))
            throw ParseError(source + ": takeoff plan needs 'start' and 'altitude'");
        plan.start = detail::json_vec3(j["start"], source + ".start");
        plan.takeoff_altitude = j["altitude"].get<double>();
        if (j.contains("then"))
            for (const auto& p : j["then"])
                plan.waypoints.push_back(detail::json_vec3(p, source + ".then"));
    } else {
        throw ParseError(source + ": unknown plan kind '" + kind + "'");
    }
    if (j.contains("tolerance"))
        plan.tolerance = j["tolerance"].get<double>();
    plan.validate();
    return plan;
}

inline FlightPlan load_flight_plan(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("flight plan file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return flight_plan_from_json(j, path.string());
}

inline DroneParams drone_params_from_json(const nlohmann::json& j)
{
    DroneParams p;
    if (j.contains("mass"))
        p.mass = j["mass"].get<double>();
    if (j.contains("drag_coefficient"))
        p.drag_coefficient = j["drag_coefficient"].get<double>();
    if (j.contains("reference_area"))
        p.reference_area = j["reference_area"].get<double>();
    if (j.contains("max_thrust_accel"))
        p.max_thrust_accel = j["max_thrust_accel"].get<double>();
    if (j.contains("max_speed"))
        p.max_speed = j["max_speed"].get<double>();
    if (j.contains("kp"))
        p.kp = j["kp"].get<double>();
    if (j.contains("kd"))
        p.kd = j["kd"].get<double>();
    p.validate();
    return p;
}

inline nlohmann::json drone_params_to_json(const DroneParams& p)
{
    return {{"mass", p.mass},
            {"drag_coefficient", p.drag_coefficient},
            {"reference_area", p.reference_area},
            {"max_thrust_accel", p.max_thrust_accel},
            {"max_speed", p.max_speed},
            {"kp", p.kp},
            {"kd", p.kd}};
}

} // namespace windsim
