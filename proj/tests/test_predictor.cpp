#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "xmc/clustering.hpp"
#include "xmc/ingest.hpp"
#include "xmc/predictor.hpp"
#include "xmc/rng.hpp"

using namespace xmc;

namespace {

// root -> {1, 2}; node 1 owns leaves {A=0, B=1}, node 2 owns {C=2, D=3}.
LabelTree two_level_tree() {
    const std::vector<int32_t> parent{-1, 0, 0, 1, 1, 2, 2};
    const std::vector<int64_t> leaf{-1, -1, -1, 0, 1, 2, 3};
    return assemble_tree(parent, leaf, 2);
}

// Scorer serving fixed conditionals keyed by node id.
LevelScorer fixed_scorer(std::map<int32_t, float> cond) {
    return [cond](int32_t, const std::vector<int32_t>& nodes) {
        std::vector<float> out;
        for (int32_t n : nodes) out.push_back(cond.at(n));
        return out;
    };
}

// Exhaustive reference: every leaf's marginal as the float product down its
// path, accumulated in the same child-times-parent order the beam uses.
std::vector<Prediction> exhaustive(const LabelTree& tree, const LevelScorer& scorer, int64_t k) {
    std::vector<float> marg(static_cast<size_t>(tree.num_nodes()), 1.0f);
    for (int32_t d = 1; d < tree.num_levels(); ++d) {
        const std::vector<int32_t> nodes = level_nodes(tree, d);
        const std::vector<float> cond = scorer(d, nodes);
        for (size_t i = 0; i < nodes.size(); ++i) {
            const int32_t parent = tree.parent[static_cast<size_t>(nodes[i])];
            marg[static_cast<size_t>(nodes[i])] =
                cond[i] * marg[static_cast<size_t>(parent)];
        }
    }
    std::vector<Prediction> out;
    for (int32_t n = 0; n < tree.num_nodes(); ++n)
        if (tree.is_leaf(n))
            out.push_back({tree.leaf_label[static_cast<size_t>(n)], marg[static_cast<size_t>(n)]});
    std::sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.label < b.label;
    });
    if (static_cast<int64_t>(out.size()) > k) out.resize(static_cast<size_t>(k));
    return out;
}

LabelTree random_tree(SplitMix64& rng, int64_t max_labels) {
    const int64_t L = 2 + static_cast<int64_t>(rng.next_range(static_cast<uint64_t>(max_labels - 1)));
    std::vector<SparseVector> reps(static_cast<size_t>(L));
    for (auto& r : reps) {
        SparseVector v;
        for (uint32_t d = 0; d < 12; ++d)
            if (rng.next_u64() % 2) v.entries.push_back({d, rng.next_double() - 0.5});
        if (v.empty()) v.entries.push_back({0, 1.0});
        r = l2_normalize(v);
    }
    DeepTreeConfig cfg;
    const int32_t c = 1 + static_cast<int32_t>(rng.next_range(3));
    // leaf parents hold at most M labels; the compressed branching bound
    // K = 2^c covers them only when M <= K
    cfg.max_leaf = 1 + static_cast<int64_t>(rng.next_range(1ull << c));
    cfg.seed = rng.next_u64();
    cfg.max_iter = 5;
    const int32_t H = static_cast<int32_t>(rng.next_range(4));
    LabelTree tree = compress_tree(build_deep_tree(reps, 12, cfg), c, H);
    REQUIRE(validate_tree(tree).ok());
    return tree;
}

LevelScorer random_scorer(uint64_t seed) {
    return [seed](int32_t level, const std::vector<int32_t>& nodes) {
        std::vector<float> out;
        out.reserve(nodes.size());
        for (int32_t n : nodes) {
            SplitMix64 rng(mix_seed(seed, mix_seed(static_cast<uint64_t>(level),
                                                   static_cast<uint64_t>(n))));
            out.push_back(static_cast<float>(rng.next_double()));
        }
        return out;
    };
}

} // namespace

TEST_CASE("marginal: product of path conditionals") {
    CHECK(marginal({0.5}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(marginal({0.9, 0.8}) == doctest::Approx(0.72).epsilon(1e-12));
    CHECK(marginal({1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(marginal({}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(marginal({0.5, 1.5}));
    CHECK_THROWS(marginal({-0.1}));
}

TEST_CASE("two-level beam oracle by hand") {
    const LabelTree tree = two_level_tree();
    // internal: node1=0.9, node2=0.6; leaves: A=0.8, B=0.3, C=0.95, D=0.2
    const LevelScorer s =
        fixed_scorer({{1, 0.9f}, {2, 0.6f}, {3, 0.8f}, {4, 0.3f}, {5, 0.95f}, {6, 0.2f}});

    // C=1: only node 1 survives; leaves A=0.72, B=0.27
    std::vector<Prediction> p = beam_search_scored(tree, s, 1, 1);
    REQUIRE(p.size() == 1);
    CHECK(p[0].label == 0);
    CHECK(p[0].score == 0.9f * 0.8f);

    // C=2: all leaves reachable; C's marginal 0.6*0.95=0.57 < A's 0.72
    p = beam_search_scored(tree, s, 2, 4);
    REQUIRE(p.size() == 4);
    CHECK(p[0].label == 0);
    CHECK(p[0].score == 0.9f * 0.8f);
    CHECK(p[1].label == 2);
    CHECK(p[1].score == 0.6f * 0.95f);
    CHECK(p[2].label == 1);
    CHECK(p[2].score == 0.9f * 0.3f);
    CHECK(p[3].label == 3);
    CHECK(p[3].score == 0.6f * 0.2f);
}

TEST_CASE("ties rank by ascending label id") {
    const LabelTree tree = two_level_tree();
    const LevelScorer s =
        fixed_scorer({{1, 0.5f}, {2, 0.5f}, {3, 0.4f}, {4, 0.4f}, {5, 0.4f}, {6, 0.4f}});
    const std::vector<Prediction> p = beam_search_scored(tree, s, 2, 4);
    REQUIRE(p.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(p[static_cast<size_t>(i)].label == i);
}

TEST_CASE("wide beam equals exhaustive enumeration float-for-float") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 120; ++trial) {
        const LabelTree tree = random_tree(rng, 256);
        int64_t max_width = 0;
        for (int32_t d = 1; d < tree.num_levels(); ++d)
            max_width = std::max(max_width, static_cast<int64_t>(
                                                tree.level_offsets[d + 1] - tree.level_offsets[d]));
        const LevelScorer s = random_scorer(mix_seed(7, static_cast<uint64_t>(trial)));
        const int64_t k = std::min<int64_t>(tree.num_labels, 10);
        const std::vector<Prediction> beam = beam_search_scored(tree, s, max_width, k);
        const std::vector<Prediction> ref = exhaustive(tree, s, k);
        REQUIRE(beam.size() == ref.size());
        for (size_t i = 0; i < beam.size(); ++i) {
            CHECK(beam[i].label == ref[i].label);
            CHECK(beam[i].score == ref[i].score); // bitwise float equality
        }
    }
}

TEST_CASE("narrow beams only lose mass: results stay a subset ranked the same") {
    SplitMix64 rng(555);
    for (int trial = 0; trial < 30; ++trial) {
        const LabelTree tree = random_tree(rng, 128);
        const LevelScorer s = random_scorer(mix_seed(9, static_cast<uint64_t>(trial)));
        const std::vector<Prediction> wide = beam_search_scored(tree, s, 1024, 5);
        for (int64_t C : {1, 2, 4, 8}) {
            const std::vector<Prediction> narrow = beam_search_scored(tree, s, C, 5);
            // every narrow prediction appears in the wide enumeration with
            // the identical score
            const std::vector<Prediction> all = beam_search_scored(tree, s, 1024, tree.num_labels);
            for (const Prediction& np : narrow) {
                const auto it = std::find_if(all.begin(), all.end(), [&](const Prediction& wp) {
                    return wp.label == np.label;
                });
                REQUIRE(it != all.end());
                CHECK(it->score == np.score);
            }
            // top-1 of a wider beam never scores below the narrower beam's top-1
            if (!narrow.empty() && !wide.empty()) CHECK(wide[0].score >= narrow[0].score);
        }
    }
}

TEST_CASE("flat tree beam equals top-k of the sigmoid scores") {
    // root with 6 leaf children
    std::vector<int32_t> parent{-1};
    std::vector<int64_t> leaf{-1};
    for (int i = 0; i < 6; ++i) {
        parent.push_back(0);
        leaf.push_back(i);
    }
    const LabelTree tree = assemble_tree(parent, leaf, 6);
    const LevelScorer s = fixed_scorer(
        {{1, 0.3f}, {2, 0.8f}, {3, 0.1f}, {4, 0.9f}, {5, 0.5f}, {6, 0.7f}});
    const std::vector<Prediction> p = beam_search_scored(tree, s, 3, 3);
    REQUIRE(p.size() == 3);
    CHECK(p[0].label == 3);
    CHECK(p[0].score == 0.9f);
    CHECK(p[1].label == 1);
    CHECK(p[1].score == 0.8f);
    CHECK(p[2].label == 5);
    CHECK(p[2].score == 0.7f);
}

TEST_CASE("beam inclusion: a leaf whose whole path wins every level is returned") {
    const LabelTree tree = two_level_tree();
    const LevelScorer s =
        fixed_scorer({{1, 0.99f}, {2, 0.01f}, {3, 0.99f}, {4, 0.01f}, {5, 0.5f}, {6, 0.5f}});
    for (int64_t C : {1, 2, 4}) {
        const std::vector<Prediction> p = beam_search_scored(tree, s, C, 1);
        REQUIRE(p.size() == 1);
        CHECK(p[0].label == 0);
    }
}

TEST_CASE("model-driven beam search matches the scored variant") {
    // Train nothing: a freshly initialized model is still a deterministic
    // scorer, so the two drivers must agree exactly.
    SynthSpec spec;
    spec.num_labels = 16;
    spec.num_clusters = 4;
    spec.samples_per_cluster = 10;
    spec.vocab_size = 40;
    spec.seed = 2;
    const Dataset data = generate_synthetic(spec);
    DeepTreeConfig tcfg;
    tcfg.max_leaf = 4;
    tcfg.seed = 3;
    const LabelTree tree =
        compress_tree(build_deep_tree(label_representations(data).reps, data.num_features, tcfg),
                      2, 1);
    std::vector<ScorerParams> models;
    for (int32_t d = 1; d <= 2; ++d) {
        const int64_t first = tree.level_offsets[d];
        models.push_back(make_scorer<float>(EncoderKind::recurrent, data.vocab_size, 12, 3, {8},
                                            tree.level_offsets[d + 1] - first, first,
                                            static_cast<uint64_t>(d)));
        models.back().level = d;
    }
    const TokenSequence& tokens = data.samples[0].tokens;
    const LevelScorer s = [&](int32_t level, const std::vector<int32_t>& nodes) {
        ForwardTrace trace;
        forward(tokens, nodes, models[static_cast<size_t>(level - 1)], false, nullptr, trace);
        return trace.probs;
    };
    const std::vector<Prediction> a = beam_search(tokens, tree, models, 3, 5);
    const std::vector<Prediction> b = beam_search_scored(tree, s, 3, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("ensemble averages member marginals, absent labels contributing zero") {
    // Oracle: run each member's beam alone, average the scores by hand
    // (labels a member never returned contribute zero), and require the
    // ensemble to reproduce that map and its ranking.
    SynthSpec spec;
    spec.num_labels = 4;
    spec.num_clusters = 2;
    spec.samples_per_cluster = 6;
    spec.vocab_size = 20;
    spec.seed = 8;
    const Dataset data = generate_synthetic(spec);
    DeepTreeConfig tcfg;
    tcfg.max_leaf = 2;
    tcfg.seed = 5;
    const LabelTree t =
        compress_tree(build_deep_tree(label_representations(data).reps, data.num_features, tcfg),
                      1, 1);
    auto mk = [&](uint64_t seed) {
        std::vector<ScorerParams> models;
        for (int32_t d = 1; d <= 2; ++d) {
            const int64_t first = t.level_offsets[d];
            models.push_back(make_scorer<float>(EncoderKind::mean, data.vocab_size, 8, 2, {6},
                                                t.level_offsets[d + 1] - first, first,
                                                mix_seed(seed, static_cast<uint64_t>(d))));
            models.back().level = d;
        }
        return models;
    };
    const std::vector<ScorerParams> a = mk(1), b = mk(2);
    const TokenSequence& tokens = data.samples[0].tokens;

    const std::vector<Prediction> pa = beam_search(tokens, t, a, 4, 4);
    const std::vector<Prediction> pb = beam_search(tokens, t, b, 4, 4);
    const std::vector<Prediction> ens =
        ensemble_predict(tokens, {{&t, &a}, {&t, &b}}, 4, 4);

    std::map<int64_t, double> expect;
    for (const Prediction& p : pa) expect[p.label] += 0.5 * static_cast<double>(p.score);
    for (const Prediction& p : pb) expect[p.label] += 0.5 * static_cast<double>(p.score);
    for (const Prediction& p : ens)
        CHECK(p.score == doctest::Approx(expect.at(p.label)).epsilon(1e-6));
    // ranking follows the averaged scores
    for (size_t i = 1; i < ens.size(); ++i) CHECK(ens[i - 1].score >= ens[i].score);

    // narrow beams make the members disagree, so some labels appear in only
    // one member's list and take the half-weight average
    const std::vector<Prediction> na = beam_search(tokens, t, a, 1, 4);
    const std::vector<Prediction> nb = beam_search(tokens, t, b, 1, 4);
    const std::vector<Prediction> nens = ensemble_predict(tokens, {{&t, &a}, {&t, &b}}, 1, 4);
    std::map<int64_t, double> nexpect;
    for (const Prediction& p : na) nexpect[p.label] += 0.5 * static_cast<double>(p.score);
    for (const Prediction& p : nb) nexpect[p.label] += 0.5 * static_cast<double>(p.score);
    for (const Prediction& p : nens)
        CHECK(p.score == doctest::Approx(nexpect.at(p.label)).epsilon(1e-6));
}

TEST_CASE("ensemble of identical members equals the single member") {
    SynthSpec spec;
    spec.num_labels = 8;
    spec.num_clusters = 2;
    spec.samples_per_cluster = 8;
    spec.vocab_size = 30;
    spec.seed = 4;
    const Dataset data = generate_synthetic(spec);
    DeepTreeConfig tcfg;
    tcfg.max_leaf = 4;
    tcfg.seed = 6;
    const LabelTree t =
        compress_tree(build_deep_tree(label_representations(data).reps, data.num_features, tcfg),
                      2, 1);
    std::vector<ScorerParams> models;
    for (int32_t d = 1; d <= 2; ++d) {
        const int64_t first = t.level_offsets[d];
        models.push_back(make_scorer<float>(EncoderKind::recurrent, data.vocab_size, 10, 3, {8},
                                            t.level_offsets[d + 1] - first, first, 21 + d));
        models.back().level = d;
    }
    const TokenSequence& tokens = data.samples[1].tokens;
    const std::vector<Prediction> single = beam_search(tokens, t, models, 4, 5);
    const std::vector<Prediction> triple = ensemble_predict(
        tokens, {{&t, &models}, {&t, &models}, {&t, &models}}, 4, 5);
    REQUIRE(single.size() == triple.size());
    for (size_t i = 0; i < single.size(); ++i) {
        CHECK(single[i].label == triple[i].label);
        CHECK(single[i].score == triple[i].score); // (3x)/3 is exact in double
    }
}

TEST_CASE("predictions round trip through the text format") {
    std::vector<std::vector<Prediction>> preds{
        {{7, 0.123456f}, {101, 0.000012345f}, {3, 1.0f}},
        {},
        {{0, 0.5f}},
    };
    std::ostringstream out;
    write_predictions(out, preds);
    const std::string text = out.str();
    // 6 significant digits
    CHECK(text.find("7:0.123456") != std::string::npos);
    CHECK(text.find("101:1.2345e-05") != std::string::npos);
    CHECK(text.find("3:1") != std::string::npos);

    std::istringstream in(text);
    const std::vector<std::vector<Prediction>> back = read_predictions(in);
    REQUIRE(back.size() == 3);
    REQUIRE(back[0].size() == 3);
    CHECK(back[1].empty());
    CHECK(back[0][0].label == 7);
    CHECK(back[0][0].score == doctest::Approx(0.123456f).epsilon(1e-6));
    CHECK(back[2][0].label == 0);
    CHECK(back[2][0].score == doctest::Approx(0.5f).epsilon(1e-9));
}

TEST_CASE("beam search validates its arguments") {
    const LabelTree tree = two_level_tree();
    const LevelScorer s = fixed_scorer(
        {{1, 0.5f}, {2, 0.5f}, {3, 0.5f}, {4, 0.5f}, {5, 0.5f}, {6, 0.5f}});
    CHECK_THROWS(beam_search_scored(tree, s, 0, 1));
    CHECK_THROWS(beam_search_scored(tree, s, 1, 0));
}
