#pragma once

// Terrain scanning: overlay a regular voxel grid on the scene and classify
// each cell as occupied or empty with the six-ray obstruction check. A cell
// (i,j,k) spans [origin + i*h, origin + (i+1)*h) per axis; its center is
// origin + (i+0.5)*h. Scanning iterates k (z) outermost, then j, then i, so
// repeated scans are reproducible including their timing profile.

#include <compare>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "windsim/common.hpp"
#include "windsim/geometry.hpp"
#include "windsim/vec3.hpp"

namespace windsim {

struct Cell {
    int i = 0;
    int j = 0;
    int k = 0;
    auto operator<=>(const Cell&) const = default;
};

struct ScanRange {
    Vec3 origin;
    int nx = 0;
    int ny = 0;
    int nz = 0;
    double cell_size = 1.0;

    std::size_t cell_count() const
    {
        return std::size_t(nx) * std::size_t(ny) * std::size_t(nz);
    }
    bool contains(int i, int j, int k) const
    {
        return i >= 0 && i < nx && j >= 0 && j < ny && k >= 0 && k < nz;
    }
    std::size_t linear(int i, int j, int k) const
    {
        return (std::size_t(k) * std::size_t(ny) + std::size_t(j)) * std::size_t(nx) +
               std::size_t(i);
    }
    Vec3 cell_center(int i, int j, int k) const
    {
        return {origin.x + (i + 0.5) * cell_size,
                origin.y + (j + 0.5) * cell_size,
                origin.z + (k + 0.5) * cell_size};
    }
    Vec3 max_corner() const
    {
        return {origin.x + nx * cell_size, origin.y + ny * cell_size,
                origin.z + nz * cell_size};
    }
    void validate() const
    {
        if (nx < 1 || ny < 1 || nz < 1)
            throw ValidationError("scan range: cell counts must be >= 1");
        if (!(cell_size > 0.0))
            throw ValidationError("scan range: cell_size must be > 0");
        if (!finite(origin))
            throw ValidationError("scan range: non-finite origin");
    }
    friend bool operator==(const ScanRange& a, const ScanRange& b)
    {
        return a.origin == b.origin && a.nx == b.nx && a.ny == b.ny && a.nz == b.nz &&
               a.cell_size == b.cell_size;
    }
};

class OccupancyGrid {
public:
    OccupancyGrid() = default;
    explicit OccupancyGrid(const ScanRange& range)
        : range_(range), occ_(range.cell_count(), 0)
    {
    }

    const ScanRange& range() const { return range_; }

    bool occupied(int i, int j, int k) const
    {
        return occ_[range_.linear(i, j, k)] != 0;
    }
    bool occupied(const Cell& c) const { return occupied(c.i, c.j, c.k); }

    void set_occupied(int i, int j, int k, bool value = true)
    {
        occ_[range_.linear(i, j, k)] = value ? 1 : 0;
    }

    std::size_t occupied_count() const
    {
        std::size_t n = 0;
        for (std::uint8_t v : occ_)
            n += v;
        return n;
    }

    // Occupied cells in ascending (k, j, i) order, i.e. ascending linear index.
    std::vector<Cell> occupied_cells() const
    {
        std::vector<Cell> out;
        for (int k = 0; k < range_.nz; ++k)
            for (int j = 0; j < range_.ny; ++j)
                for (int i = 0; i < range_.nx; ++i)
                    if (occupied(i, j, k))
                        out.push_back({i, j, k});
        return out;
    }

    friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b)
    {
        return a.range_ == b.range_ && a.occ_ == b.occ_;
    }

private:
    ScanRange range_;
    std::vector<std::uint8_t> occ_;
};

// The per-cell test: six face centers, three opposite pairs, one segment per
// pair traced in both directions (a flag collapses to one direction; results
// are identical because segment_blocked is symmetric).
inline bool obstruction_check(const Scene& scene, const Vec3& cell_center,
                              double cell_size, bool trace_both_directions = true)
{
    const double r = 0.5 * cell_size;
    for (int ax = 0; ax < 3; ++ax) {
        Vec3 lo = cell_center;
        Vec3 hi = cell_center;
        lo[ax] -= r;
        hi[ax] += r;
        if (segment_blocked(scene, {lo, hi}))
            return true;
        if (trace_both_directions && segment_blocked(scene, {hi, lo}))
            return true;
    }
    return false;
}

inline OccupancyGrid scan_terrain(const Scene& scene, const ScanRange& range,
                                  bool trace_both_directions = true)
{
    range.validate();
    scene.validate();
    OccupancyGrid grid(range);
    for (int k = 0; k < range.nz; ++k)
        for (int j = 0; j < range.ny; ++j)
            for (int i = 0; i < range.nx; ++i)
                if (obstruction_check(scene, range.cell_center(i, j, k), range.cell_size,
                                      trace_both_directions))
                    grid.set_occupied(i, j, k);
    return grid;
}

// ---------------------------------------------------------------------------
// Grid file: 8-byte magic, u32 version, f64 origin[3], u32 counts[3],
// f64 cell_size, u64 occupied count, then (u32 i, u32 j, u32 k) per occupied
// cell in ascending (k, j, i) order. Little-endian, as written by the host.
// ---------------------------------------------------------------------------

inline constexpr char kGridMagic[8] = {'W', 'S', 'I', 'M', 'G', 'R', 'I', 'D'};
inline constexpr std::uint32_t kGridVersion = 1;

inline void export_grid(const OccupancyGrid& grid, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open grid file for writing: " + path.string());
    out.write(kGridMagic, sizeof kGridMagic);
    write_pod(out, kGridVersion);
    const ScanRange& r = grid.range();
    write_pod(out, r.origin.x);
    write_pod(out, r.origin.y);
    write_pod(out, r.origin.z);
    write_pod(out, std::uint32_t(r.nx));
    write_pod(out, std::uint32_t(r.ny));
    write_pod(out, std::uint32_t(r.nz));
    write_pod(out, r.cell_size);
    const auto cells = grid.occupied_cells();
    write_pod(out, std::uint64_t(cells.size()));
    for (const Cell& c : cells) {
        write_pod(out, std::uint32_t(c.i));
        write_pod(out, std::uint32_t(c.j));
        write_pod(out, std::uint32_t(c.k));
    }
    if (!out)
        throw IoError("failed writing grid file: " + path.string());
}

inline OccupancyGrid import_grid(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open grid file: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic || std::string(magic, 8) != std::string(kGridMagic, 8))
        throw ParseError(path.string() + ": bad magic, expected WSIMGRID");
    std::uint32_t version = 0;
    read_pod(in, version, "grid file");
    if (version != kGridVersion)
        throw ParseError(path.string() + ": unsupported grid version " +
                         std::to_string(version));
    ScanRange r;
    read_pod(in, r.origin.x, "grid file");
    read_pod(in, r.origin.y, "grid file");
    read_pod(in, r.origin.z, "grid file");
    std::uint32_t nx = 0, ny = 0, nz = 0;
    read_pod(in, nx, "grid file");
    read_pod(in, ny, "grid file");
    read_pod(in, nz, "grid file");
    read_pod(in, r.cell_size, "grid file");
    r.nx = int(nx);
    r.ny = int(ny);
    r.nz = int(nz);
    r.validate();
    std::uint64_t count = 0;
    read_pod(in, count, "grid file");
    OccupancyGrid grid(r);
    for (std::uint64_t n = 0; n < count; ++n) {
        std::uint32_t i = 0, j = 0, k = 0;
        read_pod(in, i, "grid file");
        read_pod(in, j, "grid file");
        read_pod(in, k, "grid file");
        if (!r.contains(int(i), int(j), int(k)))
            throw ParseError(path.string() + ": occupied cell out of range");
        grid.set_occupied(int(i), int(j), int(k));
    }
    return grid;
}

// Debug-friendly text form: header lines then one "i j k" line per occupied
// cell.
inline void export_grid_text(const OccupancyGrid& grid, std::ostream& out)
{
    const ScanRange& r = grid.range();
    out << "windsim occupancy grid v" << kGridVersion << "\n";
    out << "origin " << format_double(r.origin.x) << ' ' << format_double(r.origin.y) << ' '
        << format_double(r.origin.z) << "\n";
    out << "cells " << r.nx << ' ' << r.ny << ' ' << r.nz << "\n";
    out << "cell_size " << format_double(r.cell_size) << "\n";
    for (const Cell& c : grid.occupied_cells())
        out << c.i << ' ' << c.j << ' ' << c.k << "\n";
}

} // namespace windsim
