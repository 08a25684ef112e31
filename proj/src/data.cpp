#include "xmc/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xmc/parallel.hpp"

namespace xmc {

void SparseVector::check_invariants() const {
    for (size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].value == 0.0)
            throw std::invalid_argument("sparse vector stores an exact zero at index " +
                                        std::to_string(entries[i].index));
        if (i > 0 && entries[i - 1].index >= entries[i].index)
            throw std::invalid_argument("sparse vector indices not strictly increasing");
    }
}

double l2_norm(const SparseVector& v) {
    double sq = 0.0;
    for (const auto& e : v.entries) sq += e.value * e.value;
    return std::sqrt(sq);
}

SparseVector l2_normalize(const SparseVector& v) {
    double norm = l2_norm(v);
    if (norm == 0.0) return {};
    SparseVector out;
    out.entries.reserve(v.entries.size());
    for (const auto& e : v.entries) {
        double scaled = e.value / norm;
        if (scaled != 0.0) out.entries.push_back({e.index, scaled});
    }
    return out;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
    double sum = 0.0;
    size_t i = 0, j = 0;
    while (i < a.entries.size() && j < b.entries.size()) {
        uint32_t ia = a.entries[i].index, ib = b.entries[j].index;
        if (ia == ib) {
            sum += a.entries[i].value * b.entries[j].value;
            ++i, ++j;
        } else if (ia < ib) {
            ++i;
        } else {
            ++j;
        }
    }
    return sum;
}

void add_into(const SparseVector& v, std::vector<double>& dense) {
    for (const auto& e : v.entries) dense[e.index] += e.value;
}

SparseVector from_dense(const std::vector<double>& dense) {
    SparseVector out;
    for (size_t i = 0; i < dense.size(); ++i)
        if (dense[i] != 0.0) out.entries.push_back({static_cast<uint32_t>(i), dense[i]});
    return out;
}

bool LabelSet::contains(uint32_t label) const {
    return std::binary_search(labels.begin(), labels.end(), label);
}

LabelSet LabelSet::from_unsorted(std::vector<uint32_t> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return LabelSet{std::move(ids)};
}

void Dataset::check_invariants() const {
    for (size_t s = 0; s < samples.size(); ++s) {
        const Sample& sm = samples[s];
        sm.features.check_invariants();
        for (const auto& e : sm.features.entries)
            if (e.index >= num_features)
                throw std::invalid_argument("sample " + std::to_string(s) +
                                            ": feature index out of range");
        for (uint32_t l : sm.labels.labels)
            if (l >= num_labels)
                throw std::invalid_argument("sample " + std::to_string(s) +
                                            ": label out of range");
        for (uint32_t t : sm.tokens.ids)
            if (t >= vocab_size)
                throw std::invalid_argument("sample " + std::to_string(s) +
                                            ": token id out of range");
    }
}

LabelRepResult label_representations(const Dataset& data) {
    const uint32_t L = data.num_labels;
    // Per-label sample lists first, so the per-label sums can run independently.
    std::vector<std::vector<uint32_t>> by_label(L);
    for (uint32_t s = 0; s < data.samples.size(); ++s)
        for (uint32_t l : data.samples[s].labels.labels) by_label[l].push_back(s);

    LabelRepResult result;
    result.reps.resize(L);
    parallel_for(L, [&](int64_t l) {
        SparseVector sum;
        for (uint32_t s : by_label[l]) {
            // merge-add; label supports are small at desk scale
            const SparseVector& f = data.samples[s].features;
            SparseVector merged;
            merged.entries.reserve(sum.entries.size() + f.entries.size());
            size_t i = 0, j = 0;
            while (i < sum.entries.size() || j < f.entries.size()) {
                if (j >= f.entries.size() ||
                    (i < sum.entries.size() && sum.entries[i].index < f.entries[j].index)) {
                    merged.entries.push_back(sum.entries[i++]);
                } else if (i >= sum.entries.size() || sum.entries[i].index > f.entries[j].index) {
                    merged.entries.push_back(f.entries[j++]);
                } else {
                    double v = sum.entries[i].value + f.entries[j].value;
                    if (v != 0.0) merged.entries.push_back({sum.entries[i].index, v});
                    ++i, ++j;
                }
            }
            sum = std::move(merged);
        }
        result.reps[l] = l2_normalize(sum);
    });
    for (uint32_t l = 0; l < L; ++l)
        if (result.reps[l].empty()) ++result.unused_labels;
    return result;
}

} // namespace xmc
