#pragma once

// In-place k-d tree over 3-D points for exact nearest-neighbor lookup.
//
// Construction: recursive median split with the axis cycling x -> y -> z.
// The comparator orders by the split coordinate and breaks ties by the
// lexicographic (i,j,k) cell coordinate, a total order, so the selected
// medians (and hence the tree) are fully determined by the input set.
// The node layout is implicit: the subrange [lo,hi) has its split point at
// lo + (hi-lo)/2, children are the left and right subranges.
//
// Queries return the entry minimizing (squared distance, cell coordinate)
// lexicographically. Squared distances are always evaluated with the same
// expression so the tie decisions match a brute-force scan exactly; subtrees
// at exactly the best distance are still visited (prune only on strictly
// greater plane distance).

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "windsim/common.hpp"
#include "windsim/vec3.hpp"
#include "windsim/voxelizer.hpp"

namespace windsim {

struct WindSample {
    Vec3 position;
    Vec3 velocity;
    Cell cell;
};

inline double squared_distance(const Vec3& a, const Vec3& b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

class KdTree3 {
public:
    KdTree3() = default;
    explicit KdTree3(std::vector<WindSample> samples) : pts_(std::move(samples))
    {
        if (!pts_.empty())
            build(0, pts_.size(), 0);
    }

    bool empty() const { return pts_.empty(); }
    std::size_t size() const { return pts_.size(); }
    const std::vector<WindSample>& entries() const { return pts_; }

    const WindSample& nearest(const Vec3& query) const
    {
        if (pts_.empty())
            throw ValidationError("kd-tree: nearest query on empty tree");
        Best best{std::numeric_limits<double>::infinity(), nullptr};
        search(0, pts_.size(), 0, query, best);
        return *best.entry;
    }

    int depth() const { return depth_of(0, pts_.size()); }

private:
    struct Best {
        double d2;
        const WindSample* entry;
    };

    void build(std::size_t lo, std::size_t hi, int axis)
    {
        if (hi - lo <= 1)
            return;
        const std::size_t m = lo + (hi - lo) / 2;
        std::nth_element(pts_.begin() + lo, pts_.begin() + m, pts_.begin() + hi,
                         [axis](const WindSample& a, const WindSample& b) {
                             if (a.position[axis] != b.position[axis])
                                 return a.position[axis] < b.position[axis];
                             return a.cell < b.cell;
                         });
        const int next = (axis + 1) % 3;
        build(lo, m, next);
        build(m + 1, hi, next);
    }

    void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, Best& best) const
    {
        if (lo >= hi)
            return;
        const std::size_t m = lo + (hi - lo) / 2;
        const WindSample& e = pts_[m];
        const double d2 = squared_distance(q, e.position);
        if (!best.entry || d2 < best.d2 || (d2 == best.d2 && e.cell < best.entry->cell))
            best = {d2, &e};
        if (hi - lo == 1)
            return;
        const int next = (axis + 1) % 3;
        const double diff = q[axis] - e.position[axis];
        if (diff < 0.0) {
            search(lo, m, next, q, best);
            if (diff * diff <= best.d2)
                search(m + 1, hi, next, q, best);
        } else {
            search(m + 1, hi, next, q, best);
            if (diff * diff <= best.d2)
                search(lo, m, next, q, best);
        }
    }

    int depth_of(std::size_t lo, std::size_t hi) const
    {
        if (lo >= hi)
            return 0;
        if (hi - lo == 1)
            return 1;
        const std::size_t m = lo + (hi - lo) / 2;
        return 1 + std::max(depth_of(lo, m), depth_of(m + 1, hi));
    }

    std::vector<WindSample> pts_;
};

// Reference scan used by tests and as the documented tie-break contract:
// minimize (squared distance, cell coordinate).
inline const WindSample& brute_force_nearest(const std::vector<WindSample>& entries,
                                             const Vec3& query)
{
    if (entries.empty())
        throw ValidationError("brute_force_nearest: empty entry list");
    const WindSample* best = &entries[0];
    double best_d2 = squared_distance(query, entries[0].position);
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const double d2 = squared_distance(query, entries[i].position);
        if (d2 < best_d2 || (d2 == best_d2 && entries[i].cell < best->cell)) {
            best = &entries[i];
            best_d2 = d2;
        }
    }
    return *best;
}

} // namespace windsim
