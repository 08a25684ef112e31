#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "xmc/data.hpp"
#include "xmc/model.hpp"
#include "xmc/tree.hpp"

namespace xmc {

struct LevelTrainConfig {
    int64_t epochs = 10;
    int64_t batch = 40;
    int64_t C = 4;       // parents kept when building the next level's candidates
    double lr = 1e-3;
    int64_t swa_start = 0; // first epoch averaged; 0 -> max(1, epochs/2)
    uint64_t seed = 1;

    // model shape
    EncoderKind encoder = EncoderKind::recurrent;
    int64_t embed_dim = 64;
    int64_t hidden = 16;
    std::vector<int64_t> fc_dims{64};

    void validate() const;
    int64_t swa_begin() const { return swa_start > 0 ? swa_start : std::max<int64_t>(1, epochs / 2); }
};

// Rolling per-sample candidate state between levels: the candidate node ids
// for the level about to be trained, and each candidate's parent marginal.
struct TrainState {
    std::vector<std::vector<int32_t>> cands;
    std::vector<std::vector<float>> parent_zhat;
};

// Previous-level nodes ranked by (positive first, then score descending,
// then node id ascending); the first at most C survive, in rank order.
std::vector<int32_t> top_parents(const std::vector<int32_t>& nodes,
                                 const std::vector<uint8_t>& z, const std::vector<float>& scores,
                                 int64_t C);

// Concatenated children of the surviving parents, parent rank order, children
// ascending within a parent.
std::vector<int32_t> select_candidates(const std::vector<int32_t>& level_nodes_prev,
                                       const std::vector<uint8_t>& z_prev,
                                       const std::vector<float>& scores_prev, int64_t C,
                                       const LabelTree& tree);

// Per-epoch progress callback: (level, epoch, mean sample loss, seconds).
using EpochLogger = std::function<void(int32_t, int64_t, double, double)>;

// Trains the model for one level on the candidate sets in state (level 1
// ignores state and uses the root's children), then advances state to the
// next level using the SWA-averaged model in eval mode. prev is the previous
// level's trained model, null at level 1.
ScorerParams train_level(const Dataset& data, const LabelTree& tree, int32_t level,
                         const ScorerParams* prev, const LevelTrainConfig& cfg, TrainState& state,
                         const EpochLogger& log = {});

// Levels 1..H+1 in order; cfgs holds one config per level, or a single
// config applied to every level.
std::vector<ScorerParams> train_all_levels(const Dataset& data, const LabelTree& tree,
                                           const std::vector<LevelTrainConfig>& cfgs,
                                           const EpochLogger& log = {});

} // namespace xmc
