#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "xmc/model.hpp"
#include "xmc/tree.hpp"

namespace xmc {

// One ranked guess: a label and its (possibly averaged) marginal probability.
struct Prediction {
    int64_t label = 0;
    float score = 0.0f;
};

// Product of conditional probabilities along a root-to-node path (root itself excluded).
double marginal(const std::vector<double>& path_conditionals);

// Conditional probabilities for a batch of same-level nodes; lets tests drive the beam
// with synthetic scorers.
using LevelScorer = std::function<std::vector<float>(int32_t level, const std::vector<int32_t>& nodes)>;

// Level-by-level beam search: score children of the surviving set, multiply each child's
// conditional by its stored parent marginal (in that order, in float), keep the top C by
// marginal (ties: node id ascending). The final level ranks leaves by marginal with ties
// broken by label id ascending and returns the top k.
std::vector<Prediction> beam_search_scored(const LabelTree& tree, const LevelScorer& scorer,
                                           int64_t beam, int64_t k);

// Same, driven by one trained model per level in eval mode.
std::vector<Prediction> beam_search(const TokenSequence& tokens, const LabelTree& tree,
                                    const std::vector<ScorerParams>& models, int64_t beam,
                                    int64_t k);

struct EnsembleMember {
    const LabelTree* tree = nullptr;
    const std::vector<ScorerParams>* models = nullptr;
};

// Mean of member marginals per label; labels missing from a member's beam contribute 0.
// Re-ranked by averaged score (ties: label id ascending), truncated to k.
std::vector<Prediction> ensemble_predict(const TokenSequence& tokens,
                                         const std::vector<EnsembleMember>& members, int64_t beam,
                                         int64_t k);

// One line per sample: space-separated "label:score" pairs, 6 significant digits.
void write_predictions(std::ostream& out, const std::vector<std::vector<Prediction>>& preds);
std::vector<std::vector<Prediction>> read_predictions(std::istream& in);

} // namespace xmc
