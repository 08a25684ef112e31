#include "xmc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "xmc/parallel.hpp"

namespace xmc {

PropensityModel PropensityModel::uniform(int64_t num_labels) {
    PropensityModel m;
    m.p.assign(static_cast<size_t>(num_labels), 1.0);
    return m;
}

PropensityModel compute_propensities(const std::vector<int64_t>& label_counts, int64_t N,
                                     double A, double B) {
    const double logN = std::log(static_cast<double>(N));
    if (!(logN > 1.0)) throw std::invalid_argument("propensities: need N > e");
    const double C = (logN - 1.0) * std::pow(1.0 + B, A);
    PropensityModel m;
    m.p.resize(label_counts.size());
    for (size_t l = 0; l < label_counts.size(); ++l) {
        if (label_counts[l] < 0) throw std::invalid_argument("propensities: negative label count");
        m.p[l] = 1.0 / (1.0 + C * std::pow(static_cast<double>(label_counts[l]) + B, -A));
    }
    return m;
}

namespace {

bool hit(const LabelSet& truth, int64_t label) {
    return std::binary_search(truth.labels.begin(), truth.labels.end(),
                              static_cast<uint32_t>(label));
}

void require_k(int64_t k) {
    if (k <= 0) throw std::invalid_argument("metrics: k must be positive");
}

} // namespace

double precision_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k) {
    require_k(k);
    double hits = 0.0;
    for (size_t i = 0; i < pred.size() && i < static_cast<size_t>(k); ++i)
        if (hit(truth, pred[i].label)) hits += 1.0;
    return hits / static_cast<double>(k);
}

double ndcg_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k) {
    require_k(k);
    if (truth.labels.empty()) return 0.0;
    double dcg = 0.0;
    for (size_t i = 0; i < pred.size() && i < static_cast<size_t>(k); ++i)
        if (hit(truth, pred[i].label)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    const size_t ideal = std::min<size_t>(static_cast<size_t>(k), truth.labels.size());
    for (size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

double psp_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k,
                const PropensityModel& prop) {
    require_k(k);
    double sum = 0.0;
    for (size_t i = 0; i < pred.size() && i < static_cast<size_t>(k); ++i) {
        if (!hit(truth, pred[i].label)) continue;
        if (pred[i].label < 0 || static_cast<size_t>(pred[i].label) >= prop.p.size())
            throw std::invalid_argument("psp: label without propensity");
        sum += 1.0 / prop.p[static_cast<size_t>(pred[i].label)];
    }
    return sum / static_cast<double>(k);
}

MetricsReport evaluate_dataset(const std::vector<std::vector<Prediction>>& preds,
                               const std::vector<LabelSet>& truths, const PropensityModel& prop) {
    if (preds.size() != truths.size())
        throw std::invalid_argument("evaluate: predictions/truth size mismatch");
    const int64_t n = static_cast<int64_t>(preds.size());
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");
    constexpr int64_t kChunk = 256;
    const int64_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<std::array<double, 8>> partial(static_cast<size_t>(nchunks),
                                               std::array<double, 8>{});
    parallel_for(nchunks, [&](int64_t c) {
        auto& acc = partial[static_cast<size_t>(c)];
        const int64_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
        for (int64_t i = lo; i < hi; ++i) {
            const auto& pr = preds[static_cast<size_t>(i)];
            const auto& tr = truths[static_cast<size_t>(i)];
            acc[0] += precision_at_k(pr, tr, 1);
            acc[1] += precision_at_k(pr, tr, 3);
            acc[2] += precision_at_k(pr, tr, 5);
            acc[3] += ndcg_at_k(pr, tr, 3);
            acc[4] += ndcg_at_k(pr, tr, 5);
            acc[5] += psp_at_k(pr, tr, 1, prop);
            acc[6] += psp_at_k(pr, tr, 3, prop);
            acc[7] += psp_at_k(pr, tr, 5, prop);
        }
    });
    std::array<double, 8> total{};
    for (const auto& acc : partial)
        for (size_t j = 0; j < 8; ++j) total[j] += acc[j];
    const double inv = 1.0 / static_cast<double>(n);
    MetricsReport r;
    r.p1 = total[0] * inv;
    r.p3 = total[1] * inv;
    r.p5 = total[2] * inv;
    r.n3 = total[3] * inv;
    r.n5 = total[4] * inv;
    r.psp1 = total[5] * inv;
    r.psp3 = total[6] * inv;
    r.psp5 = total[7] * inv;
    return r;
}

std::string metrics_json(const MetricsReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"p@1\": %.4f, \"p@3\": %.4f, \"p@5\": %.4f, \"n@3\": %.4f, \"n@5\": %.4f, "
                  "\"psp@1\": %.4f, \"psp@3\": %.4f, \"psp@5\": %.4f}",
                  report.p1, report.p3, report.p5, report.n3, report.n5, report.psp1, report.psp3,
                  report.psp5);
    return buf;
}

} // namespace xmc
