#include "xmc/tree.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "xmc/binio.hpp"

namespace xmc {

std::vector<int32_t> level_nodes(const LabelTree& tree, int32_t d) {
    if (d < 0 || d >= tree.num_levels())
        throw std::out_of_range("level_nodes: level " + std::to_string(d) +
                                " out of range [0, " + std::to_string(tree.num_levels()) + ")");
    std::vector<int32_t> nodes(static_cast<size_t>(tree.level_offsets[d + 1] - tree.level_offsets[d]));
    std::iota(nodes.begin(), nodes.end(), tree.level_offsets[d]);
    return nodes;
}

TreeReport validate_tree(const LabelTree& tree) {
    TreeReport report;
    auto flag = [&](const std::string& msg) { report.violations.push_back(msg); };

    const int32_t n = tree.num_nodes();
    if (n == 0) {
        flag("empty tree");
        return report;
    }
    if (tree.parent[0] != -1) flag("node 0 is not the root");
    for (int32_t i = 1; i < n; ++i)
        if (tree.parent[i] < 0 || tree.parent[i] >= n)
            flag("node " + std::to_string(i) + " has invalid parent");
        else if (tree.node_level[i] != tree.node_level[tree.parent[i]] + 1)
            flag("node " + std::to_string(i) + " level is not parent level + 1");

    // parent/children cross-consistency
    for (int32_t i = 0; i < n; ++i) {
        for (int32_t ch : tree.children[i])
            if (ch < 0 || ch >= n || tree.parent[ch] != i)
                flag("children list of node " + std::to_string(i) + " is inconsistent");
        if (!std::is_sorted(tree.children[i].begin(), tree.children[i].end()))
            flag("children of node " + std::to_string(i) + " are not sorted");
    }

    // leaf/label bijection
    std::vector<char> seen(static_cast<size_t>(tree.num_labels), 0);
    int64_t leaves = 0;
    for (int32_t i = 0; i < n; ++i) {
        if (!tree.is_leaf(i)) continue;
        ++leaves;
        if (!tree.children[i].empty()) flag("leaf node " + std::to_string(i) + " has children");
        const int64_t lbl = tree.leaf_label[i];
        if (lbl >= tree.num_labels || seen[static_cast<size_t>(lbl)])
            flag("leaf label " + std::to_string(lbl) + " is out of range or repeated");
        else
            seen[static_cast<size_t>(lbl)] = 1;
        if (tree.label_leaf[static_cast<size_t>(lbl)] != i)
            flag("label_leaf is not the inverse of leaf_label at label " + std::to_string(lbl));
    }
    if (leaves != tree.num_labels)
        flag("tree has " + std::to_string(leaves) + " leaves for " +
             std::to_string(tree.num_labels) + " labels");

    // uniform leaf depth at H+1
    for (int32_t i = 0; i < n; ++i)
        if (tree.is_leaf(i) && tree.node_level[i] != tree.height + 1) {
            flag("leaf depth violation: leaf " + std::to_string(i) + " at level " +
                 std::to_string(tree.node_level[i]) + ", expected " +
                 std::to_string(tree.height + 1));
        }

    // branching bound applies to every internal node except the root
    for (int32_t i = 1; i < n; ++i)
        if (!tree.is_leaf(i) &&
            static_cast<int32_t>(tree.children[i].size()) > tree.branching) {
            flag("branching violation: node " + std::to_string(i) + " has " +
                 std::to_string(tree.children[i].size()) + " children, bound " +
                 std::to_string(tree.branching));
        }

    // contiguous BFS levels
    if (tree.level_offsets.empty() || tree.level_offsets.front() != 0 ||
        tree.level_offsets.back() != n) {
        flag("level offsets do not cover the id range");
    } else {
        for (int32_t i = 0; i < n; ++i) {
            const int32_t d = tree.node_level[i];
            if (d < 0 || d >= tree.num_levels() || i < tree.level_offsets[d] ||
                i >= tree.level_offsets[d + 1])
                flag("node " + std::to_string(i) + " lies outside its level id range");
        }
    }
    return report;
}

LabelTree assemble_tree(const std::vector<int32_t>& proto_parent,
                        const std::vector<int64_t>& proto_leaf_label,
                        int32_t branching) {
    const size_t n = proto_parent.size();
    if (n == 0) throw std::invalid_argument("assemble_tree: empty node set");
    if (proto_leaf_label.size() != n)
        throw std::invalid_argument("assemble_tree: leaf_label size mismatch");

    std::vector<std::vector<int32_t>> kids(n);
    int32_t root = -1;
    for (size_t i = 0; i < n; ++i) {
        if (proto_parent[i] < 0) {
            if (root >= 0) throw std::invalid_argument("assemble_tree: multiple roots");
            root = static_cast<int32_t>(i);
        } else {
            kids[static_cast<size_t>(proto_parent[i])].push_back(static_cast<int32_t>(i));
        }
    }
    if (root < 0) throw std::invalid_argument("assemble_tree: no root");
    for (auto& k : kids) std::sort(k.begin(), k.end());

    // BFS assigns new ids level by level, children in ascending old id.
    std::vector<int32_t> order;
    order.reserve(n);
    std::vector<int32_t> new_id(n, -1);
    std::queue<int32_t> bfs;
    bfs.push(root);
    while (!bfs.empty()) {
        const int32_t old = bfs.front();
        bfs.pop();
        new_id[static_cast<size_t>(old)] = static_cast<int32_t>(order.size());
        order.push_back(old);
        for (int32_t ch : kids[static_cast<size_t>(old)]) bfs.push(ch);
    }
    if (order.size() != n) throw std::invalid_argument("assemble_tree: disconnected nodes");

    LabelTree tree;
    tree.parent.resize(n);
    tree.children.resize(n);
    tree.node_level.resize(n);
    tree.leaf_label.resize(n);
    tree.branching = branching;

    int64_t num_labels = 0;
    int32_t max_level = 0;
    for (size_t id = 0; id < n; ++id) {
        const int32_t old = order[id];
        const int32_t po = proto_parent[static_cast<size_t>(old)];
        tree.parent[id] = po < 0 ? -1 : new_id[static_cast<size_t>(po)];
        tree.node_level[id] = po < 0 ? 0 : tree.node_level[static_cast<size_t>(tree.parent[id])] + 1;
        max_level = std::max(max_level, tree.node_level[id]);
        tree.leaf_label[id] = proto_leaf_label[static_cast<size_t>(old)];
        if (tree.leaf_label[id] >= 0) num_labels = std::max(num_labels, tree.leaf_label[id] + 1);
        tree.children[id].reserve(kids[static_cast<size_t>(old)].size());
        for (int32_t ch : kids[static_cast<size_t>(old)])
            tree.children[id].push_back(new_id[static_cast<size_t>(ch)]);
        std::sort(tree.children[id].begin(), tree.children[id].end());
    }

    tree.num_labels = num_labels;
    tree.height = std::max(0, max_level - 1);
    tree.label_leaf.assign(static_cast<size_t>(num_labels), -1);
    for (size_t id = 0; id < n; ++id)
        if (tree.leaf_label[id] >= 0)
            tree.label_leaf[static_cast<size_t>(tree.leaf_label[id])] = static_cast<int32_t>(id);

    tree.level_offsets.assign(static_cast<size_t>(max_level) + 2, 0);
    for (size_t id = 0; id < n; ++id) tree.level_offsets[static_cast<size_t>(tree.node_level[id]) + 1]++;
    for (size_t d = 1; d < tree.level_offsets.size(); ++d)
        tree.level_offsets[d] += tree.level_offsets[d - 1];
    return tree;
}

LabelTree compress_tree(const LabelTree& deep, int32_t c, int32_t H) {
    if (c < 1) throw std::invalid_argument("compress_tree: c must be >= 1");
    if (H < 0) throw std::invalid_argument("compress_tree: H must be >= 0");

    const int32_t n = deep.num_nodes();
    std::vector<int32_t> new_parent(deep.parent); // rewired in place, old id space
    std::vector<char> retained(static_cast<size_t>(n), 0);
    retained[0] = 1;
    for (int32_t i = 0; i < n; ++i)
        if (deep.is_leaf(i)) {
            retained[static_cast<size_t>(i)] = 1;
            if (H == 0) new_parent[static_cast<size_t>(i)] = 0;
        }
    if (H == 0) {
        std::vector<int32_t> proto_parent;
        std::vector<int64_t> proto_leaf;
        for (int32_t i = 0; i < n; ++i) {
            if (!retained[static_cast<size_t>(i)]) continue;
            proto_parent.push_back(i == 0 ? -1 : 0);
            proto_leaf.push_back(deep.leaf_label[static_cast<size_t>(i)]);
        }
        LabelTree flat = assemble_tree(proto_parent, proto_leaf, 1 << c);
        flat.height = 0;
        return flat;
    }

    // S_0: parents of leaves (the root stays the root if it parents leaves).
    std::vector<int32_t> current;
    {
        std::vector<char> mark(static_cast<size_t>(n), 0);
        for (int32_t i = 0; i < n; ++i)
            if (deep.is_leaf(i)) mark[static_cast<size_t>(deep.parent[i])] = 1;
        for (int32_t i = 1; i < n; ++i)
            if (mark[static_cast<size_t>(i)]) current.push_back(i);
    }

    int32_t realized = 0;
    for (int32_t h = 1; !current.empty(); ++h) {
        ++realized;
        for (int32_t node : current) retained[static_cast<size_t>(node)] = 1;
        std::vector<int32_t> next;
        std::vector<char> mark(static_cast<size_t>(n), 0);
        const bool last = h >= H;
        for (int32_t node : current) {
            int32_t anc = node;
            if (last) {
                anc = 0;
            } else {
                for (int32_t step = 0; step < c && deep.parent[anc] >= 0; ++step)
                    anc = deep.parent[anc];
            }
            new_parent[static_cast<size_t>(node)] = anc == node ? deep.parent[node] : anc;
            if (anc != 0 && !mark[static_cast<size_t>(anc)]) {
                mark[static_cast<size_t>(anc)] = 1;
                next.push_back(anc);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }

    // Reindex retained nodes into a compact proto id space.
    std::vector<int32_t> compact(static_cast<size_t>(n), -1);
    int32_t m = 0;
    for (int32_t i = 0; i < n; ++i)
        if (retained[static_cast<size_t>(i)]) compact[static_cast<size_t>(i)] = m++;
    std::vector<int32_t> proto_parent(static_cast<size_t>(m));
    std::vector<int64_t> proto_leaf(static_cast<size_t>(m));
    for (int32_t i = 0; i < n; ++i) {
        if (!retained[static_cast<size_t>(i)]) continue;
        const int32_t id = compact[static_cast<size_t>(i)];
        const int32_t p = new_parent[static_cast<size_t>(i)];
        proto_parent[static_cast<size_t>(id)] = p < 0 ? -1 : compact[static_cast<size_t>(p)];
        proto_leaf[static_cast<size_t>(id)] = deep.leaf_label[static_cast<size_t>(i)];
    }

    LabelTree tree = assemble_tree(proto_parent, proto_leaf, 1 << c);
    tree.height = realized;
    return tree;
}

std::vector<int32_t> assign_node_labels(const LabelTree& tree,
                                        const std::vector<uint32_t>& labels) {
    std::vector<int32_t> positive;
    for (uint32_t label : labels) {
        if (static_cast<int64_t>(label) >= tree.num_labels)
            throw std::out_of_range("assign_node_labels: label " + std::to_string(label) +
                                    " out of range");
        for (int32_t n = tree.label_leaf[label]; tree.parent[n] >= 0; n = tree.parent[n])
            positive.push_back(n);
    }
    std::sort(positive.begin(), positive.end());
    positive.erase(std::unique(positive.begin(), positive.end()), positive.end());
    return positive;
}

void save_tree(const LabelTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    binio::write_magic(out, "PLT1");
    binio::write_pod<uint64_t>(out, static_cast<uint64_t>(tree.num_nodes()));
    binio::write_pod<uint64_t>(out, static_cast<uint64_t>(tree.num_labels));
    binio::write_pod<uint64_t>(out, static_cast<uint64_t>(tree.height));
    binio::write_pod<uint64_t>(out, static_cast<uint64_t>(tree.branching));
    std::vector<int64_t> parents(tree.parent.begin(), tree.parent.end());
    binio::write_array(out, parents);
    for (int32_t i = 0; i < tree.num_nodes(); ++i) {
        if (!tree.is_leaf(i)) continue;
        binio::write_pod<int64_t>(out, i);
        binio::write_pod<int64_t>(out, tree.leaf_label[i]);
    }
    if (!out) throw std::runtime_error("failed writing " + path);
}

LabelTree load_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    binio::expect_magic(in, "PLT1", path);
    const auto num_nodes = binio::read_pod<uint64_t>(in);
    const auto num_labels = binio::read_pod<uint64_t>(in);
    const auto height = binio::read_pod<uint64_t>(in);
    const auto branching = binio::read_pod<uint64_t>(in);
    if (num_nodes == 0 || num_labels > num_nodes)
        throw std::runtime_error(path + ": malformed header");

    std::vector<int64_t> parents;
    binio::read_array(in, parents, num_nodes);
    std::vector<int32_t> proto_parent(parents.begin(), parents.end());
    std::vector<int64_t> proto_leaf(num_nodes, -1);
    for (uint64_t i = 0; i < num_labels; ++i) {
        const auto node = binio::read_pod<int64_t>(in);
        const auto label = binio::read_pod<int64_t>(in);
        if (node < 0 || node >= static_cast<int64_t>(num_nodes) || label < 0 ||
            label >= static_cast<int64_t>(num_labels))
            throw std::runtime_error(path + ": malformed leaf record");
        proto_leaf[static_cast<size_t>(node)] = label;
    }

    LabelTree tree = assemble_tree(proto_parent, proto_leaf, static_cast<int32_t>(branching));
    // Ids were saved in BFS order, so assembly must be the identity relabeling.
    tree.height = static_cast<int32_t>(height);
    if (tree.num_labels != static_cast<int64_t>(num_labels))
        throw std::runtime_error(path + ": leaf records do not cover all labels");
    return tree;
}

} // namespace xmc
