#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xmc/data.hpp"
#include "xmc/predictor.hpp"

namespace xmc {

// Inverse-propensity weights per label, 1/p_l ready to apply to hits.
struct PropensityModel {
    std::vector<double> p; // p[l] in (0, 1]
    static PropensityModel uniform(int64_t num_labels);
};

// p_l = 1 / (1 + C (N_l + B)^-A) with C = (ln N - 1)(1 + B)^A.
PropensityModel compute_propensities(const std::vector<int64_t>& label_counts, int64_t N,
                                     double A = 0.55, double B = 1.5);

double precision_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k);
double ndcg_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k);
double psp_at_k(const std::vector<Prediction>& pred, const LabelSet& truth, int64_t k,
                const PropensityModel& prop);

struct MetricsReport {
    double p1 = 0, p3 = 0, p5 = 0;
    double n3 = 0, n5 = 0;
    double psp1 = 0, psp3 = 0, psp5 = 0;
};

// Unweighted mean over samples; parallel reduction over fixed-size chunks so results do
// not depend on the worker count.
MetricsReport evaluate_dataset(const std::vector<std::vector<Prediction>>& preds,
                               const std::vector<LabelSet>& truths, const PropensityModel& prop);

// {"p@1": ..., ..., "psp@5": ...} with exactly 4 fractional digits per value.
std::string metrics_json(const MetricsReport& report);

} // namespace xmc
