#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xmc/clustering.hpp"
#include "xmc/config.hpp"
#include "xmc/ingest.hpp"
#include "xmc/metrics.hpp"
#include "xmc/model.hpp"
#include "xmc/parallel.hpp"
#include "xmc/predictor.hpp"
#include "xmc/rng.hpp"
#include "xmc/trainer.hpp"
#include "xmc/tree.hpp"

namespace {

using namespace xmc;

void require_readable(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + what + ": " + path);
}

int32_t log2_exact(int64_t K) {
    if (K < 2) throw UsageError("tree.K must be a power of two >= 2");
    int32_t c = 0;
    int64_t v = K;
    while (v > 1) {
        if (v % 2 != 0) throw UsageError("tree.K must be a power of two >= 2");
        v /= 2;
        ++c;
    }
    return c;
}

std::string member_path(const std::string& base, int64_t member) {
    return member == 0 ? base : base + ".m" + std::to_string(member);
}

uint64_t member_tree_seed(uint64_t base_seed, int64_t member) {
    return member == 0 ? base_seed : mix_seed(base_seed, static_cast<uint64_t>(member));
}

std::string level_summary(const LabelTree& tree) {
    std::ostringstream os;
    for (int32_t d = 0; d <= tree.height + 1; ++d) {
        if (d) os << ' ';
        os << tree.level_offsets[d + 1] - tree.level_offsets[d];
    }
    return os.str();
}

std::vector<LabelSet> parse_label_file(const std::string& path, uint32_t num_labels) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open label file: " + path);
    std::vector<LabelSet> out;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<uint32_t> ids;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            const long v = std::stol(item);
            if (v < 0 || static_cast<uint32_t>(v) >= num_labels)
                throw std::runtime_error(path + ": label " + item + " out of range");
            ids.push_back(static_cast<uint32_t>(v));
        }
        out.push_back(LabelSet::from_unsorted(std::move(ids)));
    }
    return out;
}

struct DataKeys {
    std::string train_text, train_labels, test_text, test_labels, vocab;
    uint32_t num_labels = 0, vocab_max = 0, max_len = 0;
};

DataKeys data_keys(const Config& cfg) {
    DataKeys k;
    k.train_text = cfg.get_string("data.train_text", "");
    k.train_labels = cfg.get_string("data.train_labels", "");
    k.test_text = cfg.get_string("data.test_text", "");
    k.test_labels = cfg.get_string("data.test_labels", "");
    k.num_labels = static_cast<uint32_t>(cfg.get_int("data.num_labels", 0));
    k.vocab_max = static_cast<uint32_t>(cfg.get_int("data.vocab_max", 50000));
    k.max_len = static_cast<uint32_t>(cfg.get_int("data.max_len", 256));
    const std::string prefix = cfg.get_string("train.model_prefix", "model");
    k.vocab = cfg.get_string("data.vocab", prefix + ".vocab");
    return k;
}

LevelTrainConfig train_config(const Config& cfg) {
    LevelTrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs", 10);
    tc.batch = cfg.get_int("train.batch", 40);
    tc.C = cfg.get_int("train.C", 4);
    tc.lr = cfg.get_real("train.lr", 1e-3);
    tc.swa_start = cfg.get_int("train.swa_start", 0);
    tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed", 1));
    const std::string enc = cfg.get_string("train.encoder", "recurrent");
    if (enc == "recurrent") tc.encoder = EncoderKind::recurrent;
    else if (enc == "mean") tc.encoder = EncoderKind::mean;
    else throw UsageError("train.encoder must be 'recurrent' or 'mean'");
    tc.embed_dim = cfg.get_int("train.embed_dim", 64);
    tc.hidden = cfg.get_int("train.hidden", 16);
    tc.fc_dims.clear();
    for (int64_t d : cfg.get_int_list("train.fc", {64})) tc.fc_dims.push_back(d);
    try {
        tc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return tc;
}

// ---------------------------------------------------------------- build-tree

int cmd_build_tree(const Config& cfg) {
    const int64_t K = cfg.get_int("tree.K", 8);
    const int32_t c = log2_exact(K);
    const int64_t H = cfg.get_int("tree.H", 1);
    const int64_t M = cfg.get_int("tree.M", 8);
    if (H < 0) throw UsageError("tree.H must be >= 0");
    if (M < 1) throw UsageError("tree.M must be >= 1");
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("tree.seed", 17));
    const int64_t members = cfg.get_int("tree.members", 1);
    if (members < 1) throw UsageError("tree.members must be >= 1");
    const std::string out_path = cfg.get_string("tree.path", "tree.plt");

    std::vector<SparseVector> reps;
    int64_t dim = 0;
    if (cfg.get_bool("tree.random_labels", false)) {
        const DataKeys dk = data_keys(cfg);
        if (dk.num_labels == 0) throw UsageError("tree.random_labels needs data.num_labels");
        dim = cfg.get_int("tree.random_dim", 32);
        const int64_t nnz = std::min<int64_t>(cfg.get_int("tree.random_nnz", 4), dim);
        reps.resize(dk.num_labels);
        parallel_for(static_cast<int64_t>(dk.num_labels), [&](int64_t l) {
            SplitMix64 rng(mix_seed(seed, 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(l)));
            std::vector<double> dense(static_cast<size_t>(dim), 0.0);
            for (int64_t j = 0; j < nnz; ++j) {
                uint64_t idx;
                do {
                    idx = rng.next_range(static_cast<uint64_t>(dim));
                } while (dense[idx] != 0.0);
                dense[idx] = rng.next_double() + 1e-3;
            }
            reps[static_cast<size_t>(l)] = l2_normalize(from_dense(dense));
        });
    } else {
        const DataKeys dk = data_keys(cfg);
        if (dk.train_text.empty() || dk.train_labels.empty() || dk.num_labels == 0)
            throw UsageError("build-tree needs data.train_text, data.train_labels, data.num_labels");
        require_readable(dk.train_text, "training text");
        require_readable(dk.train_labels, "training labels");
        Vocabulary vocab;
        const Dataset data = parse_text_dataset_build_vocab(dk.train_text, dk.train_labels,
                                                            dk.vocab_max, dk.max_len,
                                                            dk.num_labels, &vocab);
        LabelRepResult lr = label_representations(data);
        reps = std::move(lr.reps);
        dim = data.num_features;
        if (lr.unused_labels > 0)
            std::cerr << "note: " << lr.unused_labels << " labels have no training sample\n";
    }

    for (int64_t i = 0; i < members; ++i) {
        DeepTreeConfig dcfg;
        dcfg.max_leaf = M;
        dcfg.seed = member_tree_seed(seed, i);
        dcfg.max_iter = static_cast<int32_t>(cfg.get_int("tree.max_iter", 100));
        dcfg.tol = cfg.get_real("tree.tol", 1e-4);
        const LabelTree deep = build_deep_tree(reps, dim, dcfg);
        const LabelTree tree = compress_tree(deep, c, static_cast<int32_t>(H));
        const TreeReport report = validate_tree(tree);
        if (!report.ok())
            throw std::runtime_error("built tree failed validation: " + report.violations.front());
        save_tree(tree, member_path(out_path, i));
        std::cout << level_summary(tree) << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------- train

int cmd_train(const Config& cfg, const std::string& log_path) {
    const DataKeys dk = data_keys(cfg);
    if (dk.train_text.empty() || dk.train_labels.empty() || dk.num_labels == 0)
        throw UsageError("train needs data.train_text, data.train_labels, data.num_labels");
    require_readable(dk.train_text, "training text");
    require_readable(dk.train_labels, "training labels");
    const std::string tree_path = cfg.get_string("tree.path", "tree.plt");
    const std::string prefix = cfg.get_string("train.model_prefix", "model");
    const int64_t members = cfg.get_int("tree.members", 1);
    const uint64_t tree_seed = static_cast<uint64_t>(cfg.get_int("tree.seed", 17));
    const LevelTrainConfig base = train_config(cfg);

    Vocabulary vocab;
    const Dataset data = parse_text_dataset_build_vocab(dk.train_text, dk.train_labels,
                                                        dk.vocab_max, dk.max_len, dk.num_labels,
                                                        &vocab);
    vocab.save(dk.vocab);

    std::ofstream log_out;
    const std::string log_file = !log_path.empty() ? log_path : cfg.get_string("train.log", "");
    if (!log_file.empty()) {
        log_out.open(log_file);
        if (!log_out) throw UsageError("cannot write training log: " + log_file);
    }

    for (int64_t i = 0; i < members; ++i) {
        require_readable(member_path(tree_path, i), "tree file");
        const LabelTree tree = load_tree(member_path(tree_path, i));
        if (tree.num_labels != static_cast<int64_t>(data.num_labels))
            throw std::runtime_error("tree labels (" + std::to_string(tree.num_labels) +
                                     ") do not match data labels (" +
                                     std::to_string(data.num_labels) + ")");
        LevelTrainConfig tc = base;
        tc.seed = i == 0 ? base.seed : mix_seed(base.seed, static_cast<uint64_t>(i));
        EpochLogger logger;
        if (log_out.is_open()) {
            logger = [&, i](int32_t level, int64_t epoch, double loss, double seconds) {
                nlohmann::json rec{{"member", i},
                                   {"level", level},
                                   {"epoch", epoch},
                                   {"loss", loss},
                                   {"seconds", seconds}};
                log_out << rec.dump() << "\n";
                log_out.flush();
            };
        }
        const std::vector<ScorerParams> models = train_all_levels(data, tree, {tc}, logger);
        for (size_t d = 0; d < models.size(); ++d) {
            ModelMeta meta;
            meta.level = static_cast<int64_t>(d + 1);
            meta.tree_seed = member_tree_seed(tree_seed, i);
            std::ostringstream note;
            note << "member=" << i << " epochs=" << tc.epochs << " batch=" << tc.batch
                 << " C=" << tc.C << " lr=" << tc.lr;
            meta.note = note.str();
            save_model(models[d], meta,
                       prefix + ".m" + std::to_string(i) + ".l" + std::to_string(d + 1));
        }
        std::cout << "member " << i << ": trained " << models.size() << " level model(s)\n";
    }
    return 0;
}

// ------------------------------------------------------------------- predict

struct LoadedMember {
    LabelTree tree;
    std::vector<ScorerParams> models;
};

std::vector<LoadedMember> load_members(const Config& cfg, int64_t count, uint32_t num_labels) {
    const std::string tree_path = cfg.get_string("tree.path", "tree.plt");
    const std::string prefix = cfg.get_string("train.model_prefix", "model");
    std::vector<LoadedMember> members(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        require_readable(member_path(tree_path, i), "tree file");
        LoadedMember& m = members[static_cast<size_t>(i)];
        m.tree = load_tree(member_path(tree_path, i));
        if (m.tree.num_labels != static_cast<int64_t>(num_labels))
            throw std::runtime_error("tree/member " + std::to_string(i) +
                                     " label count does not match data");
        for (int32_t d = 1; d <= m.tree.height + 1; ++d) {
            const std::string path = prefix + ".m" + std::to_string(i) + ".l" + std::to_string(d);
            require_readable(path, "model file");
            ModelMeta meta;
            m.models.push_back(load_model(path, &meta));
            if (meta.level != d)
                throw std::runtime_error("model " + path + " is for level " +
                                         std::to_string(meta.level));
        }
    }
    return members;
}

void dump_attention(const Config& cfg, const Dataset& test, const LoadedMember& member,
                    const std::vector<std::vector<Prediction>>& preds, const Vocabulary& vocab,
                    const std::string& out_path) {
    const int64_t s = cfg.get_int("predict.attention_sample", 0);
    if (s < 0 || static_cast<size_t>(s) >= test.samples.size())
        throw UsageError("predict.attention_sample out of range");
    int64_t label = cfg.get_int("predict.attention_label", -1);
    if (label < 0) {
        if (preds[static_cast<size_t>(s)].empty())
            throw std::runtime_error("no prediction to dump attention for");
        label = preds[static_cast<size_t>(s)][0].label;
    }
    if (label < 0 || label >= member.tree.num_labels)
        throw UsageError("predict.attention_label out of range");

    // Path from the label's leaf up to (but excluding) the root, then reversed.
    std::vector<int32_t> path;
    int32_t node = member.tree.label_leaf[static_cast<size_t>(label)];
    while (node != 0) {
        path.push_back(node);
        node = member.tree.parent[static_cast<size_t>(node)];
    }
    std::reverse(path.begin(), path.end());

    const Sample& sample = test.samples[static_cast<size_t>(s)];
    nlohmann::json out{{"sample", s}, {"label", label}};
    out["tokens"] = sample.tokens.ids;
    std::vector<std::string> words;
    for (uint32_t id : sample.tokens.ids) words.push_back(vocab.token_of(id));
    out["words"] = words;
    out["levels"] = nlohmann::json::array();
    ForwardTrace trace;
    for (size_t d = 0; d < path.size(); ++d) {
        forward(sample.tokens, {path[d]}, member.models[d], false, nullptr, trace);
        std::vector<float> alpha(trace.alpha.row(0), trace.alpha.row(0) + trace.alpha.cols);
        out["levels"].push_back(nlohmann::json{
            {"level", d + 1}, {"node", path[d]}, {"alpha", alpha}});
    }
    std::ofstream f(out_path);
    if (!f) throw UsageError("cannot write attention dump: " + out_path);
    f << out.dump(2) << "\n";
}

int cmd_predict(const Config& cfg, int64_t ensemble_flag, const std::string& attention_path) {
    const DataKeys dk = data_keys(cfg);
    if (dk.test_text.empty() || dk.test_labels.empty() || dk.num_labels == 0)
        throw UsageError("predict needs data.test_text, data.test_labels, data.num_labels");
    require_readable(dk.test_text, "test text");
    require_readable(dk.test_labels, "test labels");
    require_readable(dk.vocab, "vocabulary");
    const int64_t k = cfg.get_int("predict.k", 5);
    const int64_t beam = cfg.get_int("predict.C", 10);
    if (k < 1 || beam < 1) throw UsageError("predict.k and predict.C must be >= 1");
    if (k > static_cast<int64_t>(dk.num_labels))
        throw UsageError("predict.k exceeds the number of labels");
    const int64_t count = ensemble_flag > 0 ? ensemble_flag : cfg.get_int("predict.ensemble", 1);
    if (count < 1) throw UsageError("ensemble member count must be >= 1");

    const Vocabulary vocab = Vocabulary::load(dk.vocab);
    const Dataset test =
        parse_text_dataset(dk.test_text, dk.test_labels, vocab, dk.max_len, dk.num_labels);
    const std::vector<LoadedMember> loaded = load_members(cfg, count, dk.num_labels);
    std::vector<EnsembleMember> members;
    for (const LoadedMember& m : loaded) members.push_back({&m.tree, &m.models});

    std::vector<std::vector<Prediction>> preds(test.samples.size());
    parallel_for(static_cast<int64_t>(test.samples.size()), [&](int64_t i) {
        preds[static_cast<size_t>(i)] =
            ensemble_predict(test.samples[static_cast<size_t>(i)].tokens, members, beam, k);
    });

    const std::string out_path = cfg.get_string("predict.output", "predictions.txt");
    std::ofstream out(out_path);
    if (!out) throw UsageError("cannot write predictions: " + out_path);
    write_predictions(out, preds);
    std::cout << "wrote " << preds.size() << " prediction lines to " << out_path << "\n";

    if (!attention_path.empty())
        dump_attention(cfg, test, loaded[0], preds, vocab, attention_path);
    return 0;
}

// ------------------------------------------------------------------ evaluate

MetricsReport run_evaluate(const Config& cfg, bool uniform_propensity) {
    const DataKeys dk = data_keys(cfg);
    if (dk.test_labels.empty() || dk.num_labels == 0)
        throw UsageError("evaluate needs data.test_labels and data.num_labels");
    require_readable(dk.test_labels, "test labels");
    const std::string pred_path = cfg.get_string("predict.output", "predictions.txt");
    require_readable(pred_path, "predictions");

    const std::vector<LabelSet> truth = parse_label_file(dk.test_labels, dk.num_labels);
    std::ifstream pf(pred_path);
    const std::vector<std::vector<Prediction>> preds = read_predictions(pf);
    if (preds.size() != truth.size())
        throw std::runtime_error("predictions (" + std::to_string(preds.size()) +
                                 ") and test labels (" + std::to_string(truth.size()) +
                                 ") have different sample counts");

    PropensityModel prop;
    if (uniform_propensity) {
        prop = PropensityModel::uniform(dk.num_labels);
    } else {
        if (dk.train_labels.empty())
            throw UsageError("evaluate needs data.train_labels for propensities "
                             "(or --uniform-propensity)");
        require_readable(dk.train_labels, "training labels");
        const std::vector<LabelSet> train_truth = parse_label_file(dk.train_labels, dk.num_labels);
        std::vector<int64_t> counts(dk.num_labels, 0);
        for (const LabelSet& ls : train_truth)
            for (uint32_t l : ls.labels) ++counts[l];
        prop = compute_propensities(counts, static_cast<int64_t>(train_truth.size()),
                                    cfg.get_real("metrics.A", 0.55),
                                    cfg.get_real("metrics.B", 1.5));
    }
    return evaluate_dataset(preds, truth, prop);
}

int cmd_evaluate(const Config& cfg, bool uniform_propensity) {
    const MetricsReport report = run_evaluate(cfg, uniform_propensity);
    const std::string json = metrics_json(report);
    const std::string out_path = cfg.get_string("metrics.output", "metrics.json");
    std::ofstream out(out_path);
    if (!out) throw UsageError("cannot write metrics: " + out_path);
    out << json << "\n";
    std::cout << json << "\n";
    return 0;
}

// --------------------------------------------------------------------- synth

int cmd_synth(const Config& cfg) {
    SynthSpec spec;
    spec.num_labels = static_cast<uint32_t>(cfg.get_int("synth.labels", 64));
    spec.num_clusters = static_cast<uint32_t>(cfg.get_int("synth.clusters", 8));
    spec.vocab_size = static_cast<uint32_t>(cfg.get_int("synth.vocab", 160));
    spec.tail_skew = cfg.get_real("synth.tail_skew", 1.0);
    spec.doc_len = static_cast<uint32_t>(cfg.get_int("synth.doc_len", 24));
    spec.seed = static_cast<uint64_t>(cfg.get_int("synth.seed", 7));
    const int64_t train_per = cfg.get_int("synth.train_per_cluster", 500);
    const int64_t test_per = cfg.get_int("synth.test_per_cluster", 125);
    if (train_per < 1 || test_per < 1)
        throw UsageError("synth.train_per_cluster and synth.test_per_cluster must be >= 1");

    const DataKeys dk = data_keys(cfg);
    if (dk.train_text.empty() || dk.train_labels.empty() || dk.test_text.empty() ||
        dk.test_labels.empty())
        throw UsageError("synth needs data.train_text/train_labels/test_text/test_labels");

    SynthSpec train_spec = spec;
    train_spec.samples_per_cluster = static_cast<uint32_t>(train_per);
    SynthSpec test_spec = spec;
    test_spec.samples_per_cluster = static_cast<uint32_t>(test_per);
    test_spec.seed = mix_seed(spec.seed, 2);

    Dataset train = generate_synthetic(train_spec);
    Dataset test = generate_synthetic(test_spec);

    std::unordered_map<std::string, uint32_t> words;
    for (uint32_t id = kReservedIds; id < spec.vocab_size; ++id)
        words["w" + std::to_string(id)] = id;
    const Vocabulary vocab = Vocabulary::from_map(words);
    write_text_dataset(train, vocab, dk.train_text, dk.train_labels);
    write_text_dataset(test, vocab, dk.test_text, dk.test_labels);
    if (cfg.has("synth.sparse_train")) write_sparse_dataset(train, cfg.get_string("synth.sparse_train"));
    if (cfg.has("synth.sparse_test")) write_sparse_dataset(test, cfg.get_string("synth.sparse_test"));

    std::cout << "wrote " << train.samples.size() << " train / " << test.samples.size()
              << " test samples, " << spec.num_labels << " labels, vocab " << spec.vocab_size
              << "\n";
    return 0;
}

// --------------------------------------------------------------------- sweep

int cmd_sweep(const Config& cfg) {
    const std::string axis = cfg.get_string("sweep.axis", "");
    if (axis != "H" && axis != "K" && axis != "C")
        throw UsageError("sweep.axis must be one of H, K, C");
    if (!cfg.has("sweep.values")) throw UsageError("sweep.values is required");
    const std::vector<int64_t> values = cfg.get_int_list("sweep.values", {});
    const std::string out_path = cfg.get_string("sweep.output", "sweep.tsv");
    const std::string workdir = cfg.get_string("sweep.workdir", "sweep_work");
    std::filesystem::create_directories(workdir);

    const int64_t base_K = cfg.get_int("tree.K", 8);
    const int64_t base_C = cfg.get_int("train.C", 4);
    const int64_t budget = base_C * base_K; // Table 6 protocol: hold C*K fixed across K

    std::ofstream out(out_path);
    if (!out) throw UsageError("cannot write sweep table: " + out_path);
    out << "axis\tvalue\tH\tK\tC\tp@1\tp@3\tp@5\tn@3\tn@5\tpsp@1\tpsp@3\tpsp@5\n";

    for (int64_t v : values) {
        Config run = cfg;
        int64_t H = cfg.get_int("tree.H", 1), K = base_K, C = base_C;
        if (axis == "H") {
            H = v;
            run.set("tree.H", std::to_string(v));
        } else if (axis == "K") {
            K = v;
            C = std::max<int64_t>(1, budget / v);
            run.set("tree.K", std::to_string(K));
            run.set("train.C", std::to_string(C));
            run.set("predict.C", std::to_string(std::max<int64_t>(C, cfg.get_int("predict.k", 5))));
        } else {
            C = v;
            run.set("train.C", std::to_string(C));
            run.set("predict.C", std::to_string(std::max<int64_t>(C, cfg.get_int("predict.k", 5))));
        }
        const std::string tag = axis + std::to_string(v);
        run.set("tree.path", workdir + "/tree." + tag);
        run.set("train.model_prefix", workdir + "/model." + tag);
        run.set("data.vocab", workdir + "/vocab." + tag);
        run.set("predict.output", workdir + "/pred." + tag + ".txt");
        run.set("metrics.output", workdir + "/metrics." + tag + ".json");

        std::cout << "sweep " << axis << "=" << v << "\n";
        cmd_build_tree(run);
        cmd_train(run, workdir + "/train." + tag + ".jsonl");
        cmd_predict(run, 0, "");
        const MetricsReport r = run_evaluate(run, false);
        char row[512];
        std::snprintf(row, sizeof(row),
                      "%s\t%lld\t%lld\t%lld\t%lld\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n",
                      axis.c_str(), static_cast<long long>(v), static_cast<long long>(H),
                      static_cast<long long>(K), static_cast<long long>(C), r.p1, r.p3, r.p5, r.n3,
                      r.n5, r.psp1, r.psp3, r.psp5);
        out << row;
        out.flush();
    }
    std::cout << "wrote sweep table to " << out_path << "\n";
    return 0;
}

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t workers = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "key=value config file")->required();
    sub->add_option("--workers", args.workers, "worker thread cap (default: PLT_XMC_WORKERS or hardware)");
    sub->add_option("overrides", args.overrides, "config overrides as key=value");
}

Config load_config(const CommonArgs& args) {
    Config cfg = Config::from_file(args.config_path);
    cfg.apply_overrides(args.overrides);
    if (args.workers > 0) set_workers(static_cast<int>(args.workers));
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"probabilistic label tree extreme multi-label text classifier"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string log_path, attention_path;
    int64_t ensemble_flag = 0;
    bool uniform_propensity = false;

    CLI::App* build = app.add_subcommand("build-tree", "cluster labels and write the tree file(s)");
    add_common(build, args);
    CLI::App* train = app.add_subcommand("train", "train one model per tree level and member");
    add_common(train, args);
    train->add_option("--log", log_path, "JSONL per-epoch training log");
    CLI::App* predict = app.add_subcommand("predict", "beam-search top-k labels for the test set");
    add_common(predict, args);
    predict->add_option("--ensemble", ensemble_flag, "number of ensemble members to load");
    predict->add_option("--dump-attention", attention_path,
                        "write per-token attention for one sample/label as JSON");
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a predictions file against test labels");
    add_common(evaluate, args);
    evaluate->add_flag("--uniform-propensity", uniform_propensity,
                       "use propensity 1 for every label (psp@k becomes p@k)");
    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic clustered corpus");
    add_common(synth, args);
    CLI::App* sweep = app.add_subcommand("sweep", "run the pipeline across one hyperparameter axis");
    add_common(sweep, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Config cfg = load_config(args);
        if (build->parsed()) return cmd_build_tree(cfg);
        if (train->parsed()) return cmd_train(cfg, log_path);
        if (predict->parsed()) return cmd_predict(cfg, ensemble_flag, attention_path);
        if (evaluate->parsed()) return cmd_evaluate(cfg, uniform_propensity);
        if (synth->parsed()) return cmd_synth(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
