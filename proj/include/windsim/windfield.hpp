#pragma once

// The wind speed database: a k-d tree over the empty-cell wind vectors for
// nearest-neighbor retrieval at arbitrary positions, plus the query-time
// turbulence model.
//
// Turbulence is a bounded multiplicative factor on the local wind vector.
// Between queries the factor follows a mean-reverting (Ornstein-Uhlenbeck)
// step toward 1 with reflection at [1 - f, 1 + f], where f is the source
// fluctuation fraction; direction is preserved, only magnitude scales. The
// normal deviates come from a fixed Box-Muller transform over mt19937_64 so
// a seed pins the whole sequence.

#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "windsim/common.hpp"
#include "windsim/kdtree.hpp"
#include "windsim/windsolver.hpp"

namespace windsim {

// Standard normal deviate with a pinned arithmetic path (independent of the
// standard library's distribution implementation).
inline double standard_normal(std::mt19937_64& rng)
{
    const double u1 = (double(rng() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    const double u2 = double(rng() >> 11) * 0x1.0p-53;         // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct FluctuationState {
    std::uint64_t seed = 0;
    double correlation_time = 1.0; // seconds
    double amplitude = 0.0;        // fluctuation fraction f; factor stays in [1-f, 1+f]
    double factor = 1.0;
    std::mt19937_64 rng;
};

inline FluctuationState make_fluctuation(std::uint64_t seed, double amplitude,
                                         double correlation_time = 1.0)
{
    if (amplitude < 0.0 || amplitude >= 1.0)
        throw ValidationError("fluctuation amplitude must be in [0,1)");
    if (!(correlation_time > 0.0))
        throw ValidationError("fluctuation correlation_time must be > 0");
    FluctuationState s;
    s.seed = seed;
    s.amplitude = amplitude;
    s.correlation_time = correlation_time;
    s.rng.seed(seed);
    return s;
}

// One mean-reverting step of the factor. Stationary standard deviation is
// f/2, which reaches both ends of the band over a few correlation times;
// reflection keeps the factor inside [1-f, 1+f] exactly.
inline FluctuationState advance_fluctuation(FluctuationState s, double dt)
{
    if (!(dt > 0.0))
        throw ValidationError("advance_fluctuation: dt must be > 0");
    if (s.amplitude <= 0.0) {
        s.factor = 1.0;
        return s;
    }
    const double alpha = std::exp(-dt / s.correlation_time);
    const double sigma = 0.5 * s.amplitude * std::sqrt(1.0 - alpha * alpha);
    double x = 1.0 + (s.factor - 1.0) * alpha + sigma * standard_normal(s.rng);
    const double lo = 1.0 - s.amplitude;
    const double hi = 1.0 + s.amplitude;
    while (x < lo || x > hi)
        x = x < lo ? 2.0 * lo - x : 2.0 * hi - x;
    s.factor = x;
    return s;
}

class WindIndex {
public:
    WindIndex() = default;
    WindIndex(std::vector<WindSample> samples, ScanRange bounds, std::uint64_t config_hash,
              double turbulence_amplitude)
        : tree_(std::move(samples)), bounds_(bounds), config_hash_(config_hash),
          turbulence_amplitude_(turbulence_amplitude)
    {
    }

    std::size_t entry_count() const { return tree_.size(); }
    int depth() const { return tree_.depth(); }
    const ScanRange& bounds() const { return bounds_; }
    std::uint64_t config_hash() const { return config_hash_; }
    double turbulence_amplitude() const { return turbulence_amplitude_; }
    const std::vector<WindSample>& entries() const { return tree_.entries(); }

    const WindSample& nearest(const Vec3& position) const { return tree_.nearest(position); }

private:
    KdTree3 tree_;
    ScanRange bounds_;
    std::uint64_t config_hash_ = 0;
    double turbulence_amplitude_ = 0.0;
};

// Entries are fed to the tree in ascending (k, j, i) order; together with the
// total-order comparator this makes construction reproducible, so rebuilding
// from the same field yields a structurally identical tree.
inline WindIndex build_index(const WindField& field)
{
    const ScanRange& r = field.range();
    std::vector<WindSample> samples;
    samples.reserve(field.empty_cell_count());
    for (int k = 0; k < r.nz; ++k)
        for (int j = 0; j < r.ny; ++j)
            for (int i = 0; i < r.nx; ++i)
                if (!field.grid.occupied(i, j, k))
                    samples.push_back({r.cell_center(i, j, k), field.at(i, j, k), {i, j, k}});
    if (samples.empty())
        throw ValidationError("build_index: field has no empty cells");
    return WindIndex(std::move(samples), r, field.config_hash, field.turbulence_amplitude);
}

inline FluctuationState make_fluctuation(const WindIndex& index, std::uint64_t seed,
                                         double correlation_time = 1.0)
{
    return make_fluctuation(seed, index.turbulence_amplitude(), correlation_time);
}

// Nearest stored wind vector, scaled by the current turbulence factor when
// the field carries a turbulent source. Positions outside the scanned volume
// resolve to the nearest entry, so the query is total. `time` is carried for
// interface completeness; the temporal state lives in `fluct`.
inline Vec3 query_wind(const WindIndex& index, const Vec3& position, double /*time*/ = 0.0,
                       const FluctuationState* fluct = nullptr)
{
    Vec3 v = index.nearest(position).velocity;
    if (fluct != nullptr && index.turbulence_amplitude() > 0.0)
        v *= fluct->factor;
    return v;
}

// ---------------------------------------------------------------------------
// Index file: header plus entries in ascending (k, j, i) order. Loading
// rebuilds the tree with the same deterministic construction, so the loaded
// index answers every query identically to the saved one.
// ---------------------------------------------------------------------------

inline constexpr char kIndexMagic[8] = {'W', 'S', 'I', 'M', 'K', 'I', 'D', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

inline void save_index(const WindIndex& index, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open index file for writing: " + path.string());
    out.write(kIndexMagic, sizeof kIndexMagic);
    write_pod(out, kIndexVersion);
    write_pod(out, index.config_hash());
    write_pod(out, index.turbulence_amplitude());
    const ScanRange& r = index.bounds();
    write_pod(out, r.origin.x);
    write_pod(out, r.origin.y);
    write_pod(out, r.origin.z);
    write_pod(out, std::uint32_t(r.nx));
    write_pod(out, std::uint32_t(r.ny));
    write_pod(out, std::uint32_t(r.nz));
    write_pod(out, r.cell_size);
    std::vector<WindSample> sorted = index.entries();
    std::sort(sorted.begin(), sorted.end(), [&r](const WindSample& a, const WindSample& b) {
        return r.linear(a.cell.i, a.cell.j, a.cell.k) < r.linear(b.cell.i, b.cell.j, b.cell.k);
    });
    write_pod(out, std::uint64_t(sorted.size()));
    for (const WindSample& s : sorted) {
        write_pod(out, std::uint32_t(s.cell.i));
        write_pod(out, std::uint32_t(s.cell.j));
        write_pod(out, std::uint32_t(s.cell.k));
        write_pod(out, s.velocity.x);
        write_pod(out, s.velocity.y);
        write_pod(out, s.velocity.z);
    }
    if (!out)
        throw IoError("failed writing index file: " + path.string());
}

inline WindIndex load_index(const std::filesystem::path& path,
                            std::optional<std::uint64_t> expected_config_hash = std::nullopt)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open index file: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic || std::string(magic, 8) != std::string(kIndexMagic, 8))
        throw ParseError(path.string() + ": bad magic, expected WSIMKIDX");
    std::uint32_t version = 0;
    read_pod(in, version, "index file");
    if (version != kIndexVersion)
        throw ParseError(path.string() + ": unsupported index version " +
                         std::to_string(version));
    std::uint64_t hash = 0;
    read_pod(in, hash, "index file");
    if (expected_config_hash && *expected_config_hash != hash)
        throw ValidationError(path.string() + ": config hash mismatch (expected " +
                              hex_u64(*expected_config_hash) + ", file has " + hex_u64(hash) +
                              ")");
    double amplitude = 0.0;
    read_pod(in, amplitude, "index file");
    ScanRange r;
    read_pod(in, r.origin.x, "index file");
    read_pod(in, r.origin.y, "index file");
    read_pod(in, r.origin.z, "index file");
    std::uint32_t nx = 0, ny = 0, nz = 0;
    read_pod(in, nx, "index file");
    read_pod(in, ny, "index file");
    read_pod(in, nz, "index file");
    read_pod(in, r.cell_size, "index file");
    r.nx = int(nx);
    r.ny = int(ny);
    r.nz = int(nz);
    r.validate();
    std::uint64_t count = 0;
    read_pod(in, count, "index file");
    if (count == 0)
        throw ParseError(path.string() + ": index has no entries");
    std::vector<WindSample> samples;
    samples.reserve(count);
    for (std::uint64_t n = 0; n < count; ++n) {
        std::uint32_t i = 0, j = 0, k = 0;
        read_pod(in, i, "index file");
        read_pod(in, j, "index file");
        read_pod(in, k, "index file");
        if (!r.contains(int(i), int(j), int(k)))
            throw ParseError(path.string() + ": entry cell out of range");
        WindSample s;
        s.cell = {int(i), int(j), int(k)};
        s.position = r.cell_center(int(i), int(j), int(k));
        read_pod(in, s.velocity.x, "index file");
        read_pod(in, s.velocity.y, "index file");
        read_pod(in, s.velocity.z, "index file");
        samples.push_back(s);
    }
    return WindIndex(std::move(samples), r, hash, amplitude);
}

} // namespace windsim
