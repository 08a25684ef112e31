#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xmc {

// Sparse vector over a feature (or label-representation) space.
// Entries are sorted by index, indices are unique, and no entry stores an
// exact zero: arithmetic drops zeros eagerly.
struct SparseVector {
    struct Entry {
        uint32_t index;
        double value;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;

    bool empty() const { return entries.empty(); }
    size_t size() const { return entries.size(); }
    bool operator==(const SparseVector&) const = default;

    // Throws std::invalid_argument on unsorted/duplicate indices or stored zeros.
    void check_invariants() const;
};

double l2_norm(const SparseVector& v);
SparseVector l2_normalize(const SparseVector& v); // zero vector maps to zero vector
double sparse_dot(const SparseVector& a, const SparseVector& b);
void add_into(const SparseVector& v, std::vector<double>& dense);
SparseVector from_dense(const std::vector<double>& dense);

// Sorted set of label ids in [0, L).
struct LabelSet {
    std::vector<uint32_t> labels; // sorted, unique

    bool contains(uint32_t label) const;
    static LabelSet from_unsorted(std::vector<uint32_t> ids);
    bool operator==(const LabelSet&) const = default;
};

// Token ids of one document, already truncated to the configured limit.
struct TokenSequence {
    std::vector<uint32_t> ids;
    uint32_t original_length = 0;

    bool operator==(const TokenSequence&) const = default;
};

struct Sample {
    SparseVector features; // BOW
    TokenSequence tokens;
    LabelSet labels;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    uint32_t num_features = 0; // D
    uint32_t num_labels = 0;   // L
    uint32_t vocab_size = 0;

    size_t size() const { return samples.size(); }
    bool operator==(const Dataset&) const = default;

    // Throws std::invalid_argument when a sample refers to an index,
    // label or token id outside the declared bounds.
    void check_invariants() const;
};

struct LabelRepResult {
    std::vector<SparseVector> reps; // length L, each zero or unit norm
    uint32_t unused_labels = 0;     // labels with no annotated sample
};

// Per label: l2-normalized sum of the BOW features of every sample
// annotated with that label. Labels with no samples get the zero vector
// and are counted in unused_labels.
LabelRepResult label_representations(const Dataset& data);

} // namespace xmc
