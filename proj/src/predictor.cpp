#include "xmc/predictor.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace xmc {

double marginal(const std::vector<double>& path_conditionals) {
    double p = 1.0;
    for (double c : path_conditionals) {
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("marginal: conditional outside [0,1]");
        p *= c;
    }
    return p;
}

namespace {

struct BeamEntry {
    int32_t node = 0;
    float marg = 0.0f;
};

void keep_top(std::vector<BeamEntry>& entries, size_t limit) {
    std::sort(entries.begin(), entries.end(), [](const BeamEntry& a, const BeamEntry& b) {
        if (a.marg != b.marg) return a.marg > b.marg;
        return a.node < b.node;
    });
    if (entries.size() > limit) entries.resize(limit);
}

std::vector<Prediction> beam_core(const LabelTree& tree, const LevelScorer& scorer, int64_t beam,
                                  int64_t k) {
    if (beam < 1 || k < 1) throw std::invalid_argument("beam_search: beam and k must be positive");
    std::vector<int32_t> nodes = tree.children[0];
    std::vector<float> parent_marg(nodes.size(), 1.0f);
    for (int32_t level = 1; level <= tree.height + 1; ++level) {
        const std::vector<float> cond = scorer(level, nodes);
        if (cond.size() != nodes.size())
            throw std::runtime_error("beam_search: scorer returned wrong count");
        std::vector<BeamEntry> entries(nodes.size());
        for (size_t i = 0; i < nodes.size(); ++i)
            entries[i] = {nodes[i], cond[i] * parent_marg[i]};
        if (level == tree.height + 1) {
            std::sort(entries.begin(), entries.end(), [&](const BeamEntry& a, const BeamEntry& b) {
                if (a.marg != b.marg) return a.marg > b.marg;
                return tree.leaf_label[static_cast<size_t>(a.node)] <
                       tree.leaf_label[static_cast<size_t>(b.node)];
            });
            std::vector<Prediction> out;
            out.reserve(std::min<size_t>(entries.size(), static_cast<size_t>(k)));
            for (size_t i = 0; i < entries.size() && i < static_cast<size_t>(k); ++i)
                out.push_back({tree.leaf_label[static_cast<size_t>(entries[i].node)],
                               entries[i].marg});
            return out;
        }
        keep_top(entries, static_cast<size_t>(beam));
        nodes.clear();
        parent_marg.clear();
        for (const BeamEntry& e : entries) {
            for (int32_t ch : tree.children[static_cast<size_t>(e.node)]) {
                nodes.push_back(ch);
                parent_marg.push_back(e.marg);
            }
        }
    }
    return {};
}

} // namespace

std::vector<Prediction> beam_search_scored(const LabelTree& tree, const LevelScorer& scorer,
                                           int64_t beam, int64_t k) {
    return beam_core(tree, scorer, beam, k);
}

std::vector<Prediction> beam_search(const TokenSequence& tokens, const LabelTree& tree,
                                    const std::vector<ScorerParams>& models, int64_t beam,
                                    int64_t k) {
    if (static_cast<int32_t>(models.size()) != tree.height + 1)
        throw std::invalid_argument("beam_search: need one model per level");
    ForwardTrace trace;
    auto scorer = [&](int32_t level, const std::vector<int32_t>& nodes) {
        forward(tokens, nodes, models[static_cast<size_t>(level - 1)], false, nullptr, trace);
        return trace.probs;
    };
    return beam_core(tree, scorer, beam, k);
}

std::vector<Prediction> ensemble_predict(const TokenSequence& tokens,
                                         const std::vector<EnsembleMember>& members, int64_t beam,
                                         int64_t k) {
    if (members.empty()) throw std::invalid_argument("ensemble_predict: no members");
    std::map<int64_t, double> sums;
    for (const EnsembleMember& m : members) {
        for (const Prediction& p : beam_search(tokens, *m.tree, *m.models, beam, k))
            sums[p.label] += static_cast<double>(p.score);
    }
    std::vector<Prediction> merged;
    merged.reserve(sums.size());
    const double inv = 1.0 / static_cast<double>(members.size());
    for (const auto& [label, sum] : sums)
        merged.push_back({label, static_cast<float>(sum * inv)});
    std::sort(merged.begin(), merged.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.label < b.label;
    });
    if (merged.size() > static_cast<size_t>(k)) merged.resize(static_cast<size_t>(k));
    return merged;
}

void write_predictions(std::ostream& out, const std::vector<std::vector<Prediction>>& preds) {
    char buf[64];
    for (const auto& line : preds) {
        for (size_t i = 0; i < line.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%lld:%.6g", static_cast<long long>(line[i].label),
                          static_cast<double>(line[i].score));
            if (i) out << ' ';
            out << buf;
        }
        out << '\n';
    }
}

std::vector<std::vector<Prediction>> read_predictions(std::istream& in) {
    std::vector<std::vector<Prediction>> preds;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<Prediction> row;
        std::string tok;
        while (ls >> tok) {
            const size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("predictions: malformed pair '" + tok + "'");
            Prediction p;
            p.label = std::stoll(tok.substr(0, colon));
            p.score = std::stof(tok.substr(colon + 1));
            row.push_back(p);
        }
        preds.push_back(std::move(row));
    }
    return preds;
}

} // namespace xmc
