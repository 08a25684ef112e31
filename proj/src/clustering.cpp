#include "xmc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xmc/parallel.hpp"
#include "xmc/rng.hpp"

namespace xmc {

void TwoMeansScratch::ensure(int64_t dim) {
    for (int s = 0; s < 2; ++s) {
        centroid[s].resize(static_cast<size_t>(dim), 0.0);
        accum[s].resize(static_cast<size_t>(dim), 0.0);
        mark[s].resize(static_cast<size_t>(dim), 0);
    }
}

namespace {

double dot_dense(const SparseVector& v, const std::vector<double>& dense) {
    double sum = 0.0;
    for (const auto& e : v.entries) sum += e.value * dense[e.index];
    return sum;
}

void set_centroid(TwoMeansScratch& s, int side, const SparseVector& v) {
    auto& cen = s.centroid[side];
    auto& touched = s.touched_centroid[side];
    touched.clear();
    double norm2 = 0.0;
    for (const auto& e : v.entries) {
        cen[e.index] = e.value;
        touched.push_back(e.index);
        norm2 += e.value * e.value;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (uint32_t idx : touched) cen[idx] *= inv;
    }
}

} // namespace

ClusterSplit balanced_two_means(const std::vector<SparseVector>& reps,
                                const std::vector<uint32_t>& members, int64_t dim,
                                const TwoMeansConfig& config, TwoMeansScratch* scratch) {
    const int64_t n = static_cast<int64_t>(members.size());
    if (n < 2) throw std::invalid_argument("balanced_two_means: need at least 2 points");

    TwoMeansScratch local;
    TwoMeansScratch& s = scratch ? *scratch : local;
    s.ensure(dim);
    s.margin.resize(static_cast<size_t>(n));
    s.order.resize(static_cast<size_t>(n));

    SplitMix64 rng(config.seed);
    const uint64_t si = rng.next_range(static_cast<uint64_t>(n));
    uint64_t sj = rng.next_range(static_cast<uint64_t>(n));
    while (sj == si) sj = rng.next_range(static_cast<uint64_t>(n));
    set_centroid(s, 0, reps[members[si]]);
    set_centroid(s, 1, reps[members[sj]]);

    const int64_t half = (n + 1) / 2;
    auto rank = [&](uint32_t a, uint32_t b) {
        if (s.margin[a] != s.margin[b]) return s.margin[a] > s.margin[b];
        return members[a] < members[b];
    };

    ClusterSplit split;
    for (int32_t it = 0; it < config.max_iter; ++it) {
        split.iterations = it + 1;
        parallel_for(n, [&](int64_t i) {
            const SparseVector& v = reps[members[static_cast<size_t>(i)]];
            s.margin[static_cast<size_t>(i)] = dot_dense(v, s.centroid[0]) - dot_dense(v, s.centroid[1]);
        });
        std::iota(s.order.begin(), s.order.end(), 0u);
        // Only the membership of the top half matters, not its internal order,
        // and the comparator is a strict total order (ids break ties).
        std::nth_element(s.order.begin(), s.order.begin() + half, s.order.end(), rank);

        double worst_move = 0.0;
        for (int side = 0; side < 2; ++side) {
            auto& acc = s.accum[side];
            auto& touched = s.touched_accum[side];
            auto& mark = s.mark[side];
            touched.clear();
            const int64_t begin = side == 0 ? 0 : half;
            const int64_t end = side == 0 ? half : n;
            for (int64_t k = begin; k < end; ++k) {
                for (const auto& e : reps[members[s.order[static_cast<size_t>(k)]]].entries) {
                    if (!mark[e.index]) {
                        mark[e.index] = 1;
                        touched.push_back(e.index);
                        acc[e.index] = 0.0;
                    }
                    acc[e.index] += e.value;
                }
            }
            double norm2 = 0.0;
            for (uint32_t idx : touched) norm2 += acc[idx] * acc[idx];
            if (norm2 > 0.0) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (uint32_t idx : touched) acc[idx] *= inv;
            }

            auto& cen = s.centroid[side];
            auto& old_touched = s.touched_centroid[side];
            double move2 = 0.0;
            for (uint32_t idx : touched) {
                const double d = acc[idx] - cen[idx];
                move2 += d * d;
            }
            for (uint32_t idx : old_touched)
                if (!mark[idx]) move2 += cen[idx] * cen[idx];
            worst_move = std::max(worst_move, std::sqrt(move2));

            for (uint32_t idx : touched) mark[idx] = 0;
            for (uint32_t idx : old_touched) cen[idx] = 0.0;
            cen.swap(acc);
            old_touched.swap(touched);
        }
        if (worst_move < config.tol) break;
    }

    split.left.reserve(static_cast<size_t>(half));
    split.right.reserve(static_cast<size_t>(n - half));
    for (int64_t k = 0; k < n; ++k)
        (k < half ? split.left : split.right).push_back(members[s.order[static_cast<size_t>(k)]]);
    std::sort(split.left.begin(), split.left.end());
    std::sort(split.right.begin(), split.right.end());

    // Leave the scratch zeroed for the next caller.
    for (int side = 0; side < 2; ++side) {
        for (uint32_t idx : s.touched_centroid[side]) s.centroid[side][idx] = 0.0;
        s.touched_centroid[side].clear();
    }
    return split;
}

LabelTree build_deep_tree(const std::vector<SparseVector>& reps, int64_t dim,
                          const DeepTreeConfig& config) {
    const int64_t L = static_cast<int64_t>(reps.size());
    if (L < 1) throw std::invalid_argument("build_deep_tree: no labels");
    if (config.max_leaf < 1) throw std::invalid_argument("build_deep_tree: max_leaf must be >= 1");

    struct ProtoNode {
        std::vector<uint32_t> labels; // nonempty only at leaf parents
        int32_t parent = -1;
    };
    std::vector<ProtoNode> nodes(1);
    nodes[0].labels.resize(static_cast<size_t>(L));
    std::iota(nodes[0].labels.begin(), nodes[0].labels.end(), 0u);

    std::vector<TwoMeansScratch> pool(static_cast<size_t>(workers()));
    std::vector<int32_t> frontier{0};
    while (!frontier.empty()) {
        // Levels split synchronously: while any cluster on the level exceeds
        // M, every splittable cluster halves, so leaf parents share one depth
        // and the level-d cluster count is exactly min(2^d, final count).
        int64_t widest = 0;
        for (int32_t id : frontier)
            widest = std::max(widest,
                              static_cast<int64_t>(nodes[static_cast<size_t>(id)].labels.size()));
        if (widest <= config.max_leaf) break;
        std::vector<int32_t> to_split;
        std::vector<int32_t> to_chain; // singletons cannot split but must keep pace
        for (int32_t id : frontier) {
            if (nodes[static_cast<size_t>(id)].labels.size() >= 2)
                to_split.push_back(id);
            else
                to_chain.push_back(id);
        }

        std::vector<ClusterSplit> splits(to_split.size());
        parallel_for(static_cast<int64_t>(to_split.size()), [&](int64_t k) {
            const int32_t id = to_split[static_cast<size_t>(k)];
            TwoMeansConfig tm{mix_seed(config.seed, static_cast<uint64_t>(id)), config.max_iter,
                              config.tol};
            splits[static_cast<size_t>(k)] = balanced_two_means(
                reps, nodes[static_cast<size_t>(id)].labels, dim, tm,
                &pool[static_cast<size_t>(current_worker())]);
        });

        frontier.clear();
        for (size_t k = 0; k < to_split.size(); ++k) {
            const int32_t id = to_split[k];
            nodes[static_cast<size_t>(id)].labels.clear();
            nodes[static_cast<size_t>(id)].labels.shrink_to_fit();
            for (int side = 0; side < 2; ++side) {
                ProtoNode child;
                child.parent = id;
                child.labels = side == 0 ? std::move(splits[k].left) : std::move(splits[k].right);
                frontier.push_back(static_cast<int32_t>(nodes.size()));
                nodes.push_back(std::move(child));
            }
        }
        for (int32_t id : to_chain) {
            // a single-child link keeps this cluster's leaves at the same
            // depth as the ones still being halved
            ProtoNode child;
            child.parent = id;
            child.labels = std::move(nodes[static_cast<size_t>(id)].labels);
            nodes[static_cast<size_t>(id)].labels.clear();
            nodes[static_cast<size_t>(id)].labels.shrink_to_fit();
            frontier.push_back(static_cast<int32_t>(nodes.size()));
            nodes.push_back(std::move(child));
        }
    }

    std::vector<int32_t> proto_parent;
    std::vector<int64_t> proto_leaf;
    proto_parent.reserve(nodes.size() + static_cast<size_t>(L));
    for (const auto& node : nodes) {
        proto_parent.push_back(node.parent);
        proto_leaf.push_back(-1);
    }
    for (size_t id = 0; id < nodes.size(); ++id) {
        for (uint32_t label : nodes[id].labels) {
            proto_parent.push_back(static_cast<int32_t>(id));
            proto_leaf.push_back(static_cast<int64_t>(label));
        }
    }
    return assemble_tree(proto_parent, proto_leaf, 2);
}

} // namespace xmc
