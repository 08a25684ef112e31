#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace xmc {

// Label tree with BFS node ids: node 0 is the root and each level occupies a
// contiguous id range. Leaves are in one-to-one correspondence with labels.
struct LabelTree {
    std::vector<int32_t> parent;              // -1 at the root
    std::vector<std::vector<int32_t>> children; // sorted ascending
    std::vector<int32_t> node_level;          // root = 0
    std::vector<int64_t> leaf_label;          // -1 for internal nodes
    std::vector<int32_t> label_leaf;          // label id -> leaf node id
    std::vector<int32_t> level_offsets;       // size num_levels()+1

    int32_t height = 0;     // internal levels between root and leaves (H)
    int32_t branching = 2;  // max children per non-root internal node (K)
    int64_t num_labels = 0; // L

    int32_t num_nodes() const { return static_cast<int32_t>(parent.size()); }
    int32_t num_levels() const { return static_cast<int32_t>(level_offsets.size()) - 1; }
    bool is_leaf(int32_t node) const { return leaf_label[node] >= 0; }
    bool is_root(int32_t node) const { return parent[node] < 0; }
};

// Nodes of one level, shallowest first inside the id range.
// d must be in [0, num_levels).
std::vector<int32_t> level_nodes(const LabelTree& tree, int32_t d);

struct TreeReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Structural invariants: leaf/label bijection, parent/child consistency,
// uniform leaf depth ("leaf depth violation"), per-node branching bound
// ("branching violation"), contiguous BFS level ranges.
TreeReport validate_tree(const LabelTree& tree);

// Rebuilds a tree from parent pointers in an arbitrary id space, assigning
// BFS ids (children visited in ascending old id). proto_leaf_label[i] >= 0
// marks node i as the leaf of that label. branching is recorded as K.
LabelTree assemble_tree(const std::vector<int32_t>& proto_parent,
                        const std::vector<int64_t>& proto_leaf_label,
                        int32_t branching);

// Collapses a deep binary tree to height H by keeping every c-th ancestor
// level above the leaf parents; ancestor walks clamp at the root, so the
// root may end up with more than 2^c children. The result records K = 2^c
// and the realized height (<= H for shallow inputs).
LabelTree compress_tree(const LabelTree& deep, int32_t c, int32_t H);

// Positive nodes for one sample: every ancestor of a positive leaf, leaf
// included, root excluded. Sorted ascending; upward-closed below the root.
std::vector<int32_t> assign_node_labels(const LabelTree& tree,
                                        const std::vector<uint32_t>& labels);

void save_tree(const LabelTree& tree, const std::string& path);
LabelTree load_tree(const std::string& path);

} // namespace xmc
