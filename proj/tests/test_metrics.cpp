#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "xmc/metrics.hpp"
#include "xmc/parallel.hpp"
#include "xmc/rng.hpp"

using namespace xmc;

namespace {

std::vector<Prediction> ranked(std::initializer_list<int64_t> labels) {
    std::vector<Prediction> out;
    float s = 1.0f;
    for (int64_t l : labels) {
        out.push_back({l, s});
        s *= 0.9f;
    }
    return out;
}

LabelSet truth_of(std::initializer_list<uint32_t> ids) {
    return LabelSet::from_unsorted(std::vector<uint32_t>(ids));
}

// Brute-force references, written independently of the library versions.
double ref_p(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k) {
    double hits = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(pred.size()); ++i)
        if (truth.contains(static_cast<uint32_t>(pred[static_cast<size_t>(i)].label))) hits += 1;
    return hits / static_cast<double>(k);
}

double ref_ndcg(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k) {
    double dcg = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(pred.size()); ++i)
        if (truth.contains(static_cast<uint32_t>(pred[static_cast<size_t>(i)].label)))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double ideal = 0;
    const int64_t m = std::min<int64_t>(k, static_cast<int64_t>(truth.labels.size()));
    for (int64_t i = 0; i < m; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return ideal == 0 ? 0.0 : dcg / ideal;
}

double ref_psp(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k,
               const PropensityModel& prop) {
    double sum = 0;
    for (int64_t i = 0; i < k && i < static_cast<int64_t>(pred.size()); ++i) {
        const auto l = static_cast<uint32_t>(pred[static_cast<size_t>(i)].label);
        if (truth.contains(l)) sum += 1.0 / prop.p[l];
    }
    return sum / static_cast<double>(k);
}

} // namespace

TEST_CASE("precision oracle values") {
    const LabelSet truth = truth_of({2, 5, 9});
    CHECK(precision_at_k(ranked({2, 1, 5}), truth, 1) == 1.0);
    CHECK(precision_at_k(ranked({2, 1, 5}), truth, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(precision_at_k(ranked({1, 3, 4}), truth, 3) == 0.0);
    // fewer predictions than k: missing slots score zero
    CHECK(precision_at_k(ranked({2}), truth, 5) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(precision_at_k({}, truth, 5) == 0.0);
    CHECK_THROWS(precision_at_k(ranked({1}), truth, 0));
}

TEST_CASE("ndcg oracle values") {
    const LabelSet truth = truth_of({7});
    // single relevant label at rank 2 of k=2: dcg = 1/log2(3), idcg = 1
    CHECK(ndcg_at_k(ranked({1, 7}), truth, 2) ==
          doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
    CHECK(ndcg_at_k(ranked({7, 1}), truth, 2) == doctest::Approx(1.0).epsilon(1e-12));
    // two relevant of three, hits at ranks 1 and 3
    const LabelSet truth2 = truth_of({1, 3});
    const double dcg = 1.0 + 1.0 / std::log2(4.0);
    const double idcg = 1.0 + 1.0 / std::log2(3.0);
    CHECK(ndcg_at_k(ranked({1, 2, 3}), truth2, 3) == doctest::Approx(dcg / idcg).epsilon(1e-12));
    // empty truth scores zero, not NaN
    CHECK(ndcg_at_k(ranked({1, 2}), LabelSet{}, 3) == 0.0);
}

TEST_CASE("p@1 equals n@1 on every instance") {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<Prediction> pred;
        const int64_t n = 1 + static_cast<int64_t>(rng.next_range(6));
        for (int64_t i = 0; i < n; ++i)
            pred.push_back({static_cast<int64_t>(rng.next_range(30)), static_cast<float>(n - i)});
        std::vector<uint32_t> t;
        const int64_t m = 1 + static_cast<int64_t>(rng.next_range(5));
        for (int64_t i = 0; i < m; ++i) t.push_back(static_cast<uint32_t>(rng.next_range(30)));
        const LabelSet truth = LabelSet::from_unsorted(t);
        CHECK(precision_at_k(pred, truth, 1) == ndcg_at_k(pred, truth, 1));
    }
}

TEST_CASE("propensity closed form") {
    // N = 10^4, A = 0.55, B = 1.5: C = (ln 10^4 - 1) * 2.5^0.55
    const double C = (std::log(1e4) - 1.0) * std::pow(2.5, 0.55);
    std::vector<int64_t> counts{0, 100, 10000};
    const PropensityModel prop = compute_propensities(counts, 10000);
    REQUIRE(prop.p.size() == 3);
    CHECK(prop.p[0] == doctest::Approx(1.0 / (1.0 + C * std::pow(1.5, -0.55))).epsilon(1e-12));
    CHECK(prop.p[1] == doctest::Approx(1.0 / (1.0 + C * std::pow(101.5, -0.55))).epsilon(1e-12));
    CHECK(prop.p[2] == doctest::Approx(1.0 / (1.0 + C * std::pow(10001.5, -0.55))).epsilon(1e-12));
    // heads approach propensity 1
    std::vector<int64_t> head{1000000000};
    CHECK(compute_propensities(head, 1000000000).p[0] > 0.99);
    // p is monotone in the label count
    std::vector<int64_t> seq;
    for (int64_t c = 0; c <= 1000; ++c) seq.push_back(c);
    const PropensityModel mono = compute_propensities(seq, 100000);
    for (size_t i = 1; i < mono.p.size(); ++i) CHECK(mono.p[i] > mono.p[i - 1]);
    for (double p : mono.p) {
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
    }
    // requires ln N > 1
    CHECK_THROWS(compute_propensities(counts, 2));
    CHECK_THROWS(compute_propensities({-1}, 10000));
}

TEST_CASE("psp oracle values") {
    PropensityModel prop;
    prop.p = {1.0, 0.5, 0.25, 1.0};
    // hit at rank 1 with p = 0.5 and k = 1: 1/0.5 = 2
    CHECK(psp_at_k(ranked({1}), truth_of({1}), 1, prop) == 2.0);
    // miss scores zero even with tiny propensity
    CHECK(psp_at_k(ranked({2}), truth_of({1}), 1, prop) == 0.0);
    // two hits over k=2: (1/1 + 1/0.25)/2 = 2.5
    CHECK(psp_at_k(ranked({0, 2}), truth_of({0, 2}), 2, prop) == 2.5);
    // label beyond the propensity table is an error
    CHECK_THROWS(psp_at_k(ranked({9}), truth_of({9}), 1, prop));
}

TEST_CASE("uniform propensities collapse psp to precision") {
    const PropensityModel prop = PropensityModel::uniform(40);
    SplitMix64 rng(77);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Prediction> pred;
        for (int64_t i = 0; i < 5; ++i)
            pred.push_back({static_cast<int64_t>(rng.next_range(40)), static_cast<float>(9 - i)});
        std::vector<uint32_t> t;
        for (int64_t i = 0; i < 3; ++i) t.push_back(static_cast<uint32_t>(rng.next_range(40)));
        const LabelSet truth = LabelSet::from_unsorted(t);
        for (int64_t k : {1, 3, 5})
            CHECK(psp_at_k(pred, truth, k, prop) == precision_at_k(pred, truth, k));
    }
}

TEST_CASE("brute-force agreement on random instances") {
    SplitMix64 rng(2025);
    PropensityModel prop;
    prop.p.resize(50);
    for (auto& p : prop.p) p = 0.05 + 0.95 * rng.next_double();
    for (int trial = 0; trial < 3000; ++trial) {
        std::vector<Prediction> pred;
        const int64_t n = static_cast<int64_t>(rng.next_range(8));
        std::set<int64_t> used;
        for (int64_t i = 0; i < n; ++i) {
            const auto l = static_cast<int64_t>(rng.next_range(50));
            if (used.insert(l).second) pred.push_back({l, static_cast<float>(20 - i)});
        }
        std::vector<uint32_t> t;
        const int64_t m = static_cast<int64_t>(rng.next_range(6));
        for (int64_t i = 0; i < m; ++i) t.push_back(static_cast<uint32_t>(rng.next_range(50)));
        const LabelSet truth = LabelSet::from_unsorted(t);
        for (int64_t k : {1, 2, 3, 5}) {
            CHECK(precision_at_k(pred, truth, k) == ref_p(pred, truth, k));
            CHECK(ndcg_at_k(pred, truth, k) == ref_ndcg(pred, truth, k));
            CHECK(psp_at_k(pred, truth, k, prop) == ref_psp(pred, truth, k, prop));
        }
    }
}

TEST_CASE("evaluate_dataset averages per-sample metrics") {
    const PropensityModel prop = PropensityModel::uniform(10);
    std::vector<std::vector<Prediction>> preds{
        ranked({0, 1, 2, 3, 4}),
        ranked({5, 6, 7, 8, 9}),
    };
    std::vector<LabelSet> truths{truth_of({0, 1}), truth_of({0, 1})};
    const MetricsReport r = evaluate_dataset(preds, truths, prop);
    // sample 1: p1=1, p3=2/3, p5=2/5; sample 2: all zero
    CHECK(r.p1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.p3 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(r.p5 == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(r.psp1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS(evaluate_dataset(preds, {truths[0]}, prop));
}

TEST_CASE("evaluate_dataset is invariant to the worker count") {
    SplitMix64 rng(31);
    std::vector<std::vector<Prediction>> preds;
    std::vector<LabelSet> truths;
    PropensityModel prop;
    prop.p.resize(64);
    for (auto& p : prop.p) p = 0.05 + 0.95 * rng.next_double();
    for (int i = 0; i < 999; ++i) {
        std::vector<Prediction> row;
        for (int64_t j = 0; j < 5; ++j)
            row.push_back({static_cast<int64_t>(rng.next_range(64)), static_cast<float>(9 - j)});
        preds.push_back(row);
        std::vector<uint32_t> t;
        for (int64_t j = 0; j < 3; ++j) t.push_back(static_cast<uint32_t>(rng.next_range(64)));
        truths.push_back(LabelSet::from_unsorted(t));
    }
    set_workers(1);
    const MetricsReport a = evaluate_dataset(preds, truths, prop);
    set_workers(4);
    const MetricsReport b = evaluate_dataset(preds, truths, prop);
    set_workers(1);
    CHECK(a.p1 == b.p1);
    CHECK(a.p3 == b.p3);
    CHECK(a.p5 == b.p5);
    CHECK(a.n3 == b.n3);
    CHECK(a.n5 == b.n5);
    CHECK(a.psp1 == b.psp1);
    CHECK(a.psp3 == b.psp3);
    CHECK(a.psp5 == b.psp5);
}

TEST_CASE("metrics_json format: fixed key order, 4 fractional digits") {
    MetricsReport r;
    r.p1 = 1.0;
    r.p3 = 2.0 / 3.0;
    r.p5 = 0.5;
    r.n3 = 0.25;
    r.n5 = 0.125;
    r.psp1 = 1.5;
    r.psp3 = 0.0001;
    r.psp5 = 0.00004;
    CHECK(metrics_json(r) ==
          "{\"p@1\": 1.0000, \"p@3\": 0.6667, \"p@5\": 0.5000, \"n@3\": 0.2500, "
          "\"n@5\": 0.1250, \"psp@1\": 1.5000, \"psp@3\": 0.0001, \"psp@5\": 0.0000}");
}
