#pragma once

#include <cstdint>
#include <vector>

#include "xmc/data.hpp"
#include "xmc/tree.hpp"

namespace xmc {

struct ClusterSplit {
    std::vector<uint32_t> left;  // size ceil(n/2), label ids ascending
    std::vector<uint32_t> right; // size floor(n/2)
    int32_t iterations = 0;
};

struct TwoMeansConfig {
    uint64_t seed = 0;
    int32_t max_iter = 100;
    double tol = 1e-4; // stop when neither centroid moves by more (L2)
};

// Reusable dense buffers so recursive tree building does not reallocate or
// re-zero full feature-space arrays at every split.
struct TwoMeansScratch {
    std::vector<double> centroid[2], accum[2];
    std::vector<uint32_t> touched_centroid[2], touched_accum[2];
    std::vector<char> mark[2];
    std::vector<double> margin;
    std::vector<uint32_t> order;
    void ensure(int64_t dim);
};

// Balanced spherical 2-means over the member rows of reps. Centroids are
// L2-normalized after every update; members are ranked by similarity margin
// (descending, ties by label id ascending) and the top half goes left.
// Zero representations simply rank with margin contribution 0.
// Requires members.size() >= 2.
ClusterSplit balanced_two_means(const std::vector<SparseVector>& reps,
                                const std::vector<uint32_t>& members, int64_t dim,
                                const TwoMeansConfig& config,
                                TwoMeansScratch* scratch = nullptr);

struct DeepTreeConfig {
    int64_t max_leaf = 8; // M: stop splitting at this cluster size
    uint64_t seed = 0;
    int32_t max_iter = 100;
    double tol = 1e-4;
};

// Recursive balanced halving over all labels until clusters hold at most
// max_leaf labels; those clusters become leaf parents. Splits across one
// frontier run in parallel; every split draws its seed from the node id, so
// the tree is identical for any worker count.
LabelTree build_deep_tree(const std::vector<SparseVector>& reps, int64_t dim,
                          const DeepTreeConfig& config);

} // namespace xmc
