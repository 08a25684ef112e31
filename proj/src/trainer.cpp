#include "xmc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xmc/ingest.hpp"
#include "xmc/parallel.hpp"
#include "xmc/rng.hpp"

namespace xmc {

namespace {
constexpr int64_t kGradChunk = 8; // fixed reduction chunk: results do not depend on workers
}

void LevelTrainConfig::validate() const {
    if (epochs < 1 || batch < 1 || C < 1) throw std::invalid_argument("train config: epochs, batch and C must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: bad learning rate");
    if (swa_begin() > epochs) throw std::invalid_argument("train config: swa_start exceeds epochs");
    if (embed_dim < 1 || hidden < 1 || fc_dims.empty())
        throw std::invalid_argument("train config: bad model shape");
}

std::vector<int32_t> top_parents(const std::vector<int32_t>& nodes,
                                 const std::vector<uint8_t>& z, const std::vector<float>& scores,
                                 int64_t C) {
    if (nodes.size() != z.size() || nodes.size() != scores.size())
        throw std::invalid_argument("top_parents: z/scores not aligned with nodes");
    std::vector<size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (z[a] != z[b]) return z[a] > z[b];
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return nodes[a] < nodes[b];
    });
    std::vector<int32_t> kept;
    kept.reserve(std::min<size_t>(order.size(), static_cast<size_t>(C)));
    for (size_t i = 0; i < order.size() && i < static_cast<size_t>(C); ++i)
        kept.push_back(nodes[order[i]]);
    return kept;
}

std::vector<int32_t> select_candidates(const std::vector<int32_t>& level_nodes_prev,
                                       const std::vector<uint8_t>& z_prev,
                                       const std::vector<float>& scores_prev, int64_t C,
                                       const LabelTree& tree) {
    std::vector<int32_t> out;
    for (int32_t parent : top_parents(level_nodes_prev, z_prev, scores_prev, C)) {
        const auto& kids = tree.children[static_cast<size_t>(parent)];
        out.insert(out.end(), kids.begin(), kids.end());
    }
    return out;
}

namespace {

struct WorkerBuffers {
    ForwardTrace trace;
    std::vector<uint32_t> padded;
};

TokenSequence pad_tokens(const TokenSequence& tokens, int64_t to_len,
                         std::vector<uint32_t>& buffer) {
    buffer.assign(tokens.ids.begin(), tokens.ids.end());
    buffer.resize(static_cast<size_t>(to_len), kPadId);
    TokenSequence padded;
    padded.ids = buffer;
    padded.original_length = tokens.original_length;
    return padded;
}

// Positive nodes per sample (all levels, sorted by id).
std::vector<std::vector<int32_t>> sample_positives(const Dataset& data, const LabelTree& tree) {
    std::vector<std::vector<int32_t>> pos(data.samples.size());
    parallel_for(static_cast<int64_t>(data.samples.size()), [&](int64_t i) {
        pos[static_cast<size_t>(i)] =
            assign_node_labels(tree, data.samples[static_cast<size_t>(i)].labels.labels);
    });
    return pos;
}

bool is_positive(const std::vector<int32_t>& sorted_nodes, int32_t node) {
    return std::binary_search(sorted_nodes.begin(), sorted_nodes.end(), node);
}

} // namespace

ScorerParams train_level(const Dataset& data, const LabelTree& tree, int32_t level,
                         const ScorerParams* prev, const LevelTrainConfig& cfg, TrainState& state,
                         const EpochLogger& log) {
    cfg.validate();
    if (level < 1 || level > tree.height + 1)
        throw std::invalid_argument("train_level: level out of range");
    const int64_t N = static_cast<int64_t>(data.samples.size());
    if (N == 0) throw std::invalid_argument("train_level: empty dataset");
    const int64_t first = tree.level_offsets[level];
    const int64_t num_nodes = tree.level_offsets[level + 1] - first;
    const uint64_t level_seed = mix_seed(cfg.seed, static_cast<uint64_t>(level));

    if (level == 1) {
        state.cands.assign(static_cast<size_t>(N), tree.children[0]);
        state.parent_zhat.assign(static_cast<size_t>(N),
                                 std::vector<float>(tree.children[0].size(), 1.0f));
    } else if (static_cast<int64_t>(state.cands.size()) != N) {
        throw std::logic_error("train_level: candidate state missing for level " +
                               std::to_string(level));
    }

    ScorerParams model =
        prev ? init_from_previous_level(*prev, num_nodes, first, mix_seed(level_seed, 7))
             : make_scorer<float>(cfg.encoder, data.vocab_size, cfg.embed_dim, cfg.hidden,
                                  cfg.fc_dims, num_nodes, first, mix_seed(level_seed, 3));
    model.level = level;

    const auto positives = sample_positives(data, tree);
    auto targets_for = [&](int64_t i, const std::vector<int32_t>& cands,
                           std::vector<uint8_t>& out) {
        out.resize(cands.size());
        for (size_t j = 0; j < cands.size(); ++j)
            out[j] = is_positive(positives[static_cast<size_t>(i)], cands[j]) ? 1 : 0;
    };

    OptimizerState opt;
    opt.lr = cfg.lr;
    SwaState swa;

    const int64_t max_chunks = (cfg.batch + kGradChunk - 1) / kGradChunk;
    std::vector<ScorerParams> chunk_grads(static_cast<size_t>(max_chunks), make_grad_like(model));
    std::vector<double> chunk_loss(static_cast<size_t>(max_chunks));
    std::vector<WorkerBuffers> buffers(static_cast<size_t>(workers()));
    ScorerParams total_grad = make_grad_like(model);

    std::vector<int64_t> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), int64_t{0});

    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        {
            SplitMix64 shuffle_rng(mix_seed(level_seed, 1000 + static_cast<uint64_t>(epoch)));
            for (int64_t i = N - 1; i > 0; --i) {
                const auto j = static_cast<int64_t>(shuffle_rng.next_range(static_cast<uint64_t>(i + 1)));
                std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
            }
        }
        double epoch_loss = 0.0;

        for (int64_t begin = 0; begin < N; begin += cfg.batch) {
            const int64_t bsize = std::min(cfg.batch, N - begin);
            int64_t max_len = 1;
            for (int64_t b = 0; b < bsize; ++b)
                max_len = std::max(max_len, static_cast<int64_t>(
                                                data.samples[static_cast<size_t>(
                                                                 order[static_cast<size_t>(begin + b)])]
                                                    .tokens.ids.size()));

            const int64_t nchunks = (bsize + kGradChunk - 1) / kGradChunk;
            parallel_for(nchunks, [&](int64_t c) {
                auto& grad = chunk_grads[static_cast<size_t>(c)];
                visit_params(grad, [](const char*, std::vector<float>& v) {
                    std::fill(v.begin(), v.end(), 0.0f);
                });
                double loss = 0.0;
                auto& buf = buffers[static_cast<size_t>(current_worker())];
                std::vector<uint8_t> targets;
                const int64_t lo = c * kGradChunk, hi = std::min(bsize, lo + kGradChunk);
                for (int64_t b = lo; b < hi; ++b) {
                    const int64_t i = order[static_cast<size_t>(begin + b)];
                    const Sample& sample = data.samples[static_cast<size_t>(i)];
                    const auto& cands = state.cands[static_cast<size_t>(i)];
                    targets_for(i, cands, targets);
                    SplitMix64 rng(mix_seed(mix_seed(level_seed, 2000 + static_cast<uint64_t>(epoch)),
                                            static_cast<uint64_t>(i)));
                    const int64_t valid = static_cast<int64_t>(sample.tokens.ids.size());
                    const TokenSequence padded = pad_tokens(sample.tokens, max_len, buf.padded);
                    forward(padded, cands, model, true, &rng, buf.trace, valid);
                    loss += bce_loss(buf.trace.probs, targets);
                    backward(buf.trace, targets, model, grad);
                }
                chunk_loss[static_cast<size_t>(c)] = loss;
            });

            visit_params(total_grad, [](const char*, std::vector<float>& v) {
                std::fill(v.begin(), v.end(), 0.0f);
            });
            auto total_arrays = param_arrays(total_grad);
            for (int64_t c = 0; c < nchunks; ++c) {
                auto arrays = param_arrays(chunk_grads[static_cast<size_t>(c)]);
                for (size_t a = 0; a < arrays.size(); ++a) {
                    auto& dst = *total_arrays[a];
                    const auto& src = *arrays[a];
                    for (size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
                }
                epoch_loss += chunk_loss[static_cast<size_t>(c)];
            }
            const float inv = 1.0f / static_cast<float>(bsize);
            visit_params(total_grad, [&](const char*, std::vector<float>& v) {
                for (auto& x : v) x *= inv;
            });
            adam_step(model, total_grad, opt);
        }

        if (epoch >= cfg.swa_begin()) swa_update(swa, model);
        if (log) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log(level, epoch, epoch_loss / static_cast<double>(N), secs);
        }
    }
    swa_write_back(swa, model);

    // Advance the candidate state with the averaged model in eval mode.
    if (level <= tree.height) {
        const int64_t bound = cfg.C * tree.branching;
        std::vector<std::vector<int32_t>> next_cands(static_cast<size_t>(N));
        std::vector<std::vector<float>> next_zhat(static_cast<size_t>(N));
        std::atomic<int64_t> violation{-1};
        parallel_for(N, [&](int64_t i) {
            auto& buf = buffers[static_cast<size_t>(current_worker())];
            const Sample& sample = data.samples[static_cast<size_t>(i)];
            const auto& cands = state.cands[static_cast<size_t>(i)];
            forward(sample.tokens, cands, model, false, nullptr, buf.trace);
            std::vector<float> zhat(cands.size());
            std::vector<uint8_t> z(cands.size());
            for (size_t j = 0; j < cands.size(); ++j) {
                zhat[j] = buf.trace.probs[j] * state.parent_zhat[static_cast<size_t>(i)][j];
                z[j] = is_positive(positives[static_cast<size_t>(i)], cands[j]) ? 1 : 0;
            }
            auto& out_c = next_cands[static_cast<size_t>(i)];
            auto& out_z = next_zhat[static_cast<size_t>(i)];
            for (int32_t parentnode : top_parents(cands, z, zhat, cfg.C)) {
                const float pz =
                    zhat[static_cast<size_t>(std::find(cands.begin(), cands.end(), parentnode) -
                                             cands.begin())];
                for (int32_t ch : tree.children[static_cast<size_t>(parentnode)]) {
                    out_c.push_back(ch);
                    out_z.push_back(pz);
                }
            }
            if (static_cast<int64_t>(out_c.size()) > bound) violation.store(i);
        });
        if (violation.load() >= 0)
            throw std::logic_error("candidate bound violated: sample " +
                                   std::to_string(violation.load()) + " exceeds C*K at level " +
                                   std::to_string(level + 1));
        state.cands = std::move(next_cands);
        state.parent_zhat = std::move(next_zhat);
    }
    return model;
}

std::vector<ScorerParams> train_all_levels(const Dataset& data, const LabelTree& tree,
                                           const std::vector<LevelTrainConfig>& cfgs,
                                           const EpochLogger& log) {
    const int32_t levels = tree.height + 1;
    if (cfgs.empty() || (cfgs.size() != 1 && static_cast<int32_t>(cfgs.size()) != levels))
        throw std::invalid_argument("train_all_levels: need one config or one per level");
    std::vector<ScorerParams> models;
    TrainState state;
    for (int32_t d = 1; d <= levels; ++d) {
        const LevelTrainConfig& cfg = cfgs.size() == 1 ? cfgs[0] : cfgs[static_cast<size_t>(d - 1)];
        models.push_back(
            train_level(data, tree, d, models.empty() ? nullptr : &models.back(), cfg, state, log));
    }
    return models;
}

} // namespace xmc
