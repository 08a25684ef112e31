#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "xmc/clustering.hpp"
#include "xmc/parallel.hpp"
#include "xmc/rng.hpp"

using namespace xmc;

namespace {

SparseVector unit1d(double x) {
    SparseVector v;
    if (x != 0.0) v.entries.push_back({0, x});
    return l2_normalize(v);
}

// 2-d point, normalized
SparseVector unit2d(double x, double y) {
    SparseVector v;
    if (x != 0.0) v.entries.push_back({0, x});
    if (y != 0.0) v.entries.push_back({1, y});
    return l2_normalize(v);
}

std::vector<uint32_t> iota(uint32_t n) {
    std::vector<uint32_t> ids(n);
    for (uint32_t i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

} // namespace

TEST_CASE("two points always split one left, one right") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        std::vector<SparseVector> reps{unit2d(1, 0), unit2d(0, 1)};
        TwoMeansConfig cfg;
        cfg.seed = seed;
        const ClusterSplit s = balanced_two_means(reps, iota(2), 2, cfg);
        CHECK(s.left.size() == 1);
        CHECK(s.right.size() == 1);
        CHECK(s.left[0] != s.right[0]);
    }
}

TEST_CASE("well separated even groups are recovered exactly") {
    // Two tight groups of four on the unit circle: angles near 0 and near
    // pi/2. With even group sizes the balanced halves can realize the true
    // partition, so any converged run must find it.
    std::vector<SparseVector> reps;
    for (double a : {0.00, 0.02, 0.04, 0.03}) reps.push_back(unit2d(std::cos(a), std::sin(a)));
    for (double a : {1.53, 1.55, 1.57, 1.56}) reps.push_back(unit2d(std::cos(a), std::sin(a)));
    for (uint64_t seed = 0; seed < 10; ++seed) {
        TwoMeansConfig cfg;
        cfg.seed = seed;
        const ClusterSplit s = balanced_two_means(reps, iota(8), 2, cfg);
        REQUIRE(s.left.size() == 4);
        const std::set<uint32_t> left(s.left.begin(), s.left.end());
        const bool a_left = left == std::set<uint32_t>{0, 1, 2, 3};
        const bool b_left = left == std::set<uint32_t>{4, 5, 6, 7};
        CHECK((a_left || b_left));
    }
}

TEST_CASE("split is balanced: sizes differ by at most one, members partitioned") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const uint32_t n = 2 + static_cast<uint32_t>(rng.next_u64() % 29);
        std::vector<SparseVector> reps;
        for (uint32_t i = 0; i < n; ++i) {
            SparseVector v;
            for (uint32_t d = 0; d < 6; ++d)
                if (rng.next_u64() % 2) v.entries.push_back({d, rng.next_double() - 0.5});
            reps.push_back(l2_normalize(v));
        }
        TwoMeansConfig cfg;
        cfg.seed = trial;
        const ClusterSplit s = balanced_two_means(reps, iota(n), 6, cfg);
        CHECK(s.left.size() == (n + 1) / 2);
        CHECK(s.right.size() == n / 2);
        std::vector<uint32_t> all = s.left;
        all.insert(all.end(), s.right.begin(), s.right.end());
        std::sort(all.begin(), all.end());
        CHECK(all == iota(n));
        CHECK(std::is_sorted(s.left.begin(), s.left.end()));
        CHECK(std::is_sorted(s.right.begin(), s.right.end()));
    }
}

TEST_CASE("fewer than two members is rejected") {
    std::vector<SparseVector> reps{unit1d(1)};
    TwoMeansConfig cfg;
    CHECK_THROWS(balanced_two_means(reps, {0}, 1, cfg));
    CHECK_THROWS(balanced_two_means(reps, {}, 1, cfg));
}

TEST_CASE("zero representations are tolerated") {
    std::vector<SparseVector> reps{SparseVector{}, unit2d(1, 0), SparseVector{}, unit2d(0, 1)};
    TwoMeansConfig cfg;
    cfg.seed = 5;
    const ClusterSplit s = balanced_two_means(reps, iota(4), 2, cfg);
    CHECK(s.left.size() == 2);
    CHECK(s.right.size() == 2);
}

TEST_CASE("deep tree: separated clusters become separate subtrees") {
    // 8 labels in two tight groups of 4.
    std::vector<SparseVector> reps;
    for (double a : {0.00, 0.01, 0.02, 0.03}) reps.push_back(unit2d(std::cos(a), std::sin(a)));
    for (double a : {1.54, 1.55, 1.56, 1.57}) reps.push_back(unit2d(std::cos(a), std::sin(a)));
    DeepTreeConfig cfg;
    cfg.max_leaf = 4;
    cfg.seed = 9;
    // compress to K=8 so the leaf parents respect the recorded bound
    const LabelTree tree = compress_tree(build_deep_tree(reps, 2, cfg), 3, 1);
    CHECK(validate_tree(tree).ok());
    CHECK(tree.num_labels == 8);
    // Root has two children; each child's subtree holds one tight group.
    REQUIRE(tree.children[0].size() == 2);
    for (int32_t mid : tree.children[0]) {
        std::set<int64_t> group;
        for (int32_t leaf : tree.children[mid]) group.insert(tree.leaf_label[leaf]);
        const bool low = group == std::set<int64_t>{0, 1, 2, 3};
        const bool high = group == std::set<int64_t>{4, 5, 6, 7};
        CHECK((low || high));
    }
}

TEST_CASE("deep tree leaf-parent sizes never exceed max_leaf") {
    SplitMix64 rng(123);
    std::vector<SparseVector> reps;
    for (int i = 0; i < 37; ++i) {
        SparseVector v;
        for (uint32_t d = 0; d < 8; ++d)
            if (rng.next_u64() % 3) v.entries.push_back({d, rng.next_double() - 0.5});
        reps.push_back(l2_normalize(v));
    }
    DeepTreeConfig cfg;
    cfg.max_leaf = 5;
    cfg.seed = 2;
    const LabelTree tree = compress_tree(build_deep_tree(reps, 8, cfg), 3, 8);
    CHECK(validate_tree(tree).ok());
    for (int32_t n = 0; n < tree.num_nodes(); ++n) {
        if (tree.is_leaf(n)) continue;
        bool leaf_parent = !tree.children[n].empty() && tree.is_leaf(tree.children[n][0]);
        if (leaf_parent) CHECK(tree.children[n].size() <= 5);
    }
}

TEST_CASE("max_leaf=1 keeps every leaf at one depth via chain links") {
    // 5 labels force uneven halving (3/2); the singleton branches must be
    // chained so the leaf level stays uniform.
    for (int64_t L : {3, 5, 7, 13}) {
        std::vector<SparseVector> reps;
        SplitMix64 rng(static_cast<uint64_t>(L));
        for (int64_t i = 0; i < L; ++i) {
            SparseVector v;
            for (uint32_t d = 0; d < 4; ++d) v.entries.push_back({d, rng.next_double() + 0.1});
            reps.push_back(l2_normalize(v));
        }
        DeepTreeConfig cfg;
        cfg.max_leaf = 1;
        cfg.seed = 3;
        const LabelTree deep = build_deep_tree(reps, 4, cfg);
        int32_t leaf_level = -1;
        for (int32_t n = 0; n < deep.num_nodes(); ++n) {
            if (!deep.is_leaf(n)) continue;
            if (leaf_level < 0) leaf_level = deep.node_level[n];
            CHECK(deep.node_level[n] == leaf_level);
        }
        // every leaf parent holds exactly one label
        for (int32_t n = 0; n < deep.num_nodes(); ++n)
            if (!deep.is_leaf(n) && !deep.children[n].empty() && deep.is_leaf(deep.children[n][0]))
                CHECK(deep.children[n].size() == 1);
        const LabelTree flatish = compress_tree(deep, 2, 1);
        CHECK(validate_tree(flatish).ok());
    }
}

TEST_CASE("deep tree is invariant to the worker count") {
    SplitMix64 rng(321);
    std::vector<SparseVector> reps;
    for (int i = 0; i < 64; ++i) {
        SparseVector v;
        for (uint32_t d = 0; d < 10; ++d)
            if (rng.next_u64() % 2) v.entries.push_back({d, rng.next_double() - 0.5});
        reps.push_back(l2_normalize(v));
    }
    DeepTreeConfig cfg;
    cfg.max_leaf = 4;
    cfg.seed = 31;
    set_workers(1);
    const LabelTree serial = build_deep_tree(reps, 10, cfg);
    set_workers(4);
    const LabelTree parallel = build_deep_tree(reps, 10, cfg);
    set_workers(1);
    CHECK(serial.parent == parallel.parent);
    CHECK(serial.leaf_label == parallel.leaf_label);
    CHECK(serial.level_offsets == parallel.level_offsets);
}

TEST_CASE("brute-force oracle: optimal balanced split of four 1-d points") {
    // Points 0, 1, 10, 11 embedded on the unit circle via angle = value/20.
    // The only sensible balanced split groups {0,1} versus {10,11}.
    std::vector<SparseVector> reps;
    for (double x : {0.0, 1.0, 10.0, 11.0}) {
        const double a = x / 20.0;
        reps.push_back(unit2d(std::cos(a), std::sin(a)));
    }
    for (uint64_t seed = 0; seed < 10; ++seed) {
        TwoMeansConfig cfg;
        cfg.seed = seed;
        const ClusterSplit s = balanced_two_means(reps, iota(4), 2, cfg);
        std::set<uint32_t> left(s.left.begin(), s.left.end());
        const bool ab = left == std::set<uint32_t>{0, 1} || left == std::set<uint32_t>{2, 3};
        CHECK(ab);
    }
}
