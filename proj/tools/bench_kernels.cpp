// Times the OpenMP lane of each heavy kernel against the serial reference
// lane and checks that both produce bitwise-identical results.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "xmc/clustering.hpp"
#include "xmc/ingest.hpp"
#include "xmc/metrics.hpp"
#include "xmc/parallel.hpp"
#include "xmc/predictor.hpp"
#include "xmc/rng.hpp"
#include "xmc/trainer.hpp"
#include "xmc/tree.hpp"

using namespace xmc;

namespace {

double time_once(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
    std::printf("%-24s serial %8.3f ms   %d workers %8.3f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, default_workers(), parallel_s * 1e3,
                parallel_s > 0 ? serial_s / parallel_s : 0.0,
                equal ? "bitwise equal" : "MISMATCH");
}

} // namespace

int main() {
    SynthSpec spec;
    spec.num_labels = 256;
    spec.num_clusters = 16;
    spec.samples_per_cluster = 250;
    spec.vocab_size = 1024;
    const Dataset data = generate_synthetic(spec);

    // label representations
    set_workers(1);
    LabelRepResult reps_serial;
    const double t_reps_s = time_once([&] { reps_serial = label_representations(data); });
    set_workers(default_workers());
    LabelRepResult reps_par;
    const double t_reps_p = time_once([&] { reps_par = label_representations(data); });
    report("label_representations", t_reps_s, t_reps_p, reps_serial.reps == reps_par.reps);

    // tree construction (clustering margins dominate)
    DeepTreeConfig dcfg;
    dcfg.max_leaf = 8;
    dcfg.seed = 11;
    set_workers(1);
    LabelTree deep_serial;
    const double t_tree_s =
        time_once([&] { deep_serial = build_deep_tree(reps_par.reps, data.num_features, dcfg); });
    set_workers(default_workers());
    LabelTree deep_par;
    const double t_tree_p =
        time_once([&] { deep_par = build_deep_tree(reps_par.reps, data.num_features, dcfg); });
    report("build_deep_tree", t_tree_s, t_tree_p, deep_serial.parent == deep_par.parent &&
                                                      deep_serial.leaf_label == deep_par.leaf_label);

    // one training epoch (batch gradients)
    const LabelTree tree = compress_tree(deep_par, 3, 1);
    LevelTrainConfig tc;
    tc.epochs = 1;
    tc.batch = 40;
    tc.embed_dim = 32;
    tc.hidden = 8;
    tc.seed = 5;
    set_workers(1);
    TrainState st_serial;
    ScorerParams m_serial;
    const double t_train_s =
        time_once([&] { m_serial = train_level(data, tree, 1, nullptr, tc, st_serial); });
    set_workers(default_workers());
    TrainState st_par;
    ScorerParams m_par;
    const double t_train_p =
        time_once([&] { m_par = train_level(data, tree, 1, nullptr, tc, st_par); });
    bool train_equal = true;
    const auto a_serial = param_arrays(m_serial);
    const auto a_par = param_arrays(m_par);
    for (size_t i = 0; i < a_serial.size(); ++i)
        if (*a_serial[i] != *a_par[i]) train_equal = false;
    report("train_level epoch", t_train_s, t_train_p, train_equal);

    // beam prediction over the dataset
    const std::vector<ScorerParams> models = {m_par, train_level(data, tree, 2, &m_par, tc, st_par)};
    std::vector<std::vector<Prediction>> preds_serial(data.samples.size()),
        preds_par(data.samples.size());
    set_workers(1);
    const double t_pred_s = time_once([&] {
        parallel_for(static_cast<int64_t>(data.samples.size()), [&](int64_t i) {
            preds_serial[i] = beam_search(data.samples[i].tokens, tree, models, 10, 5);
        });
    });
    set_workers(default_workers());
    const double t_pred_p = time_once([&] {
        parallel_for(static_cast<int64_t>(data.samples.size()), [&](int64_t i) {
            preds_par[i] = beam_search(data.samples[i].tokens, tree, models, 10, 5);
        });
    });
    bool pred_equal = true;
    for (size_t i = 0; i < preds_serial.size(); ++i)
        for (size_t j = 0; j < preds_serial[i].size(); ++j)
            if (preds_serial[i][j].label != preds_par[i][j].label ||
                preds_serial[i][j].score != preds_par[i][j].score)
                pred_equal = false;
    report("beam_search dataset", t_pred_s, t_pred_p, pred_equal);

    // metrics reduction
    std::vector<LabelSet> truth;
    for (const Sample& s : data.samples) truth.push_back(s.labels);
    const PropensityModel prop = PropensityModel::uniform(data.num_labels);
    set_workers(1);
    MetricsReport r_serial;
    const double t_met_s = time_once([&] { r_serial = evaluate_dataset(preds_par, truth, prop); });
    set_workers(default_workers());
    MetricsReport r_par;
    const double t_met_p = time_once([&] { r_par = evaluate_dataset(preds_par, truth, prop); });
    report("evaluate_dataset", t_met_s, t_met_p,
           r_serial.p1 == r_par.p1 && r_serial.p5 == r_par.p5 && r_serial.psp5 == r_par.psp5);
    return 0;
}
