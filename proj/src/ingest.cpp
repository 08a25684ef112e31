#include "xmc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "xmc/rng.hpp"

namespace xmc {

namespace {

[[noreturn]] void parse_fail(const std::string& path, size_t line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

} // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& documents, uint32_t max_size) {
    struct Stat {
        uint64_t count = 0;
        uint64_t first_seen = 0;
    };
    std::unordered_map<std::string, Stat> stats;
    uint64_t position = 0;
    for (const std::string& doc : documents) {
        std::istringstream ss(doc);
        std::string tok;
        while (ss >> tok) {
            auto [it, inserted] = stats.try_emplace(tok);
            if (inserted) it->second.first_seen = position;
            ++it->second.count;
            ++position;
        }
    }
    std::vector<std::pair<std::string, Stat>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first_seen < b.second.first_seen;
    });
    if (ranked.size() > max_size) ranked.resize(max_size);

    Vocabulary v;
    v.id_to_token_.resize(kReservedIds + ranked.size());
    v.id_to_token_[kUnkId] = "<unk>";
    v.id_to_token_[kPadId] = "<pad>";
    for (size_t i = 0; i < ranked.size(); ++i) {
        uint32_t id = kReservedIds + static_cast<uint32_t>(i);
        v.token_to_id_[ranked[i].first] = id;
        v.id_to_token_[id] = ranked[i].first;
    }
    v.kept_ = static_cast<uint32_t>(ranked.size());
    return v;
}

Vocabulary Vocabulary::from_map(const std::unordered_map<std::string, uint32_t>& token_to_id) {
    Vocabulary v;
    uint32_t max_id = kReservedIds - 1;
    for (const auto& [tok, id] : token_to_id) max_id = std::max(max_id, id);
    v.id_to_token_.resize(max_id + 1);
    v.id_to_token_[kUnkId] = "<unk>";
    if (kPadId < v.id_to_token_.size() && v.id_to_token_[kPadId].empty())
        v.id_to_token_[kPadId] = "<pad>";
    for (const auto& [tok, id] : token_to_id) {
        v.token_to_id_[tok] = id;
        v.id_to_token_[id] = tok;
    }
    v.kept_ = static_cast<uint32_t>(token_to_id.size());
    return v;
}

uint32_t Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(uint32_t id) const { return id_to_token_.at(id); }

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    // ids are implied by line order, reserved ids first
    for (uint32_t id = kReservedIds; id < id_to_token_.size(); ++id)
        out << id_to_token_[id] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    Vocabulary v;
    v.id_to_token_ = {"<unk>", "<pad>"};
    std::string tok;
    while (std::getline(in, tok)) {
        if (tok.empty()) continue;
        uint32_t id = static_cast<uint32_t>(v.id_to_token_.size());
        v.token_to_id_[tok] = id;
        v.id_to_token_.push_back(tok);
    }
    v.kept_ = static_cast<uint32_t>(v.id_to_token_.size()) - kReservedIds;
    return v;
}

namespace {

// Parses "l1,l2,..." into a LabelSet, tolerating trailing spaces and an
// empty label field.
LabelSet parse_label_field(const std::string& field, uint32_t num_labels,
                           const std::string& path, size_t line_no) {
    std::vector<uint32_t> ids;
    size_t pos = 0;
    while (pos < field.size()) {
        size_t comma = field.find(',', pos);
        std::string piece = field.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos);
        if (!piece.empty()) {
            uint32_t value = 0;
            auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
            if (ec != std::errc() || ptr != piece.data() + piece.size())
                parse_fail(path, line_no, "bad label '" + piece + "'");
            if (value >= num_labels)
                parse_fail(path, line_no, "label " + std::to_string(value) + " >= L");
            ids.push_back(value);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return LabelSet::from_unsorted(std::move(ids));
}

} // namespace

Dataset parse_sparse_dataset(const std::string& path, bool header) {
    std::ifstream in = open_or_throw(path);
    Dataset data;
    std::string line;
    size_t line_no = 0;
    size_t expected_samples = 0;
    bool counted = false;

    if (header) {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, header expected");
        ++line_no;
        std::istringstream hs(line);
        uint64_t n = 0, d = 0, l = 0;
        if (!(hs >> n >> d >> l)) parse_fail(path, line_no, "malformed header, want 'N D L'");
        expected_samples = n;
        counted = true;
        data.num_features = static_cast<uint32_t>(d);
        data.num_labels = static_cast<uint32_t>(l);
    }

    std::vector<std::string> raw_lines;
    while (std::getline(in, line)) raw_lines.push_back(line);

    if (!header) {
        // infer D and L in a first pass
        uint32_t max_feat = 0, max_label = 0;
        for (const std::string& raw : raw_lines) {
            std::istringstream ss(raw);
            std::string field;
            bool first = true;
            while (ss >> field) {
                size_t colon = field.find(':');
                if (first) {
                    first = false;
                    if (colon == std::string::npos) {
                        for (size_t pos = 0; pos < field.size();) {
                            size_t comma = field.find(',', pos);
                            std::string piece = field.substr(
                                pos, comma == std::string::npos ? std::string::npos : comma - pos);
                            if (!piece.empty())
                                max_label = std::max(max_label, (uint32_t)std::stoul(piece) + 1);
                            if (comma == std::string::npos) break;
                            pos = comma + 1;
                        }
                        continue;
                    }
                }
                if (colon != std::string::npos)
                    max_feat = std::max(max_feat, (uint32_t)std::stoul(field.substr(0, colon)) + 1);
            }
        }
        data.num_features = max_feat;
        data.num_labels = max_label;
    }

    for (const std::string& raw : raw_lines) {
        ++line_no;
        // skip blank lines only at end-of-file position; inner blanks are samples
        std::istringstream ss(raw);
        std::string field;
        Sample sample;
        bool have_labels = false;
        uint32_t last_index = 0;
        bool have_feature = false;
        while (ss >> field) {
            size_t colon = field.find(':');
            if (!have_labels && colon == std::string::npos) {
                sample.labels = parse_label_field(field, data.num_labels, path, line_no);
                have_labels = true;
                continue;
            }
            have_labels = true; // first feature implies empty label field
            if (colon == std::string::npos || colon == 0 || colon + 1 >= field.size())
                parse_fail(path, line_no, "malformed feature '" + field + "'");
            uint32_t index = 0;
            auto head = field.substr(0, colon);
            auto [p1, e1] = std::from_chars(head.data(), head.data() + head.size(), index);
            if (e1 != std::errc() || p1 != head.data() + head.size())
                parse_fail(path, line_no, "malformed feature index '" + head + "'");
            double value = 0.0;
            try {
                value = std::stod(field.substr(colon + 1));
            } catch (const std::exception&) {
                parse_fail(path, line_no, "malformed feature value in '" + field + "'");
            }
            if (index >= data.num_features)
                parse_fail(path, line_no, "feature index " + std::to_string(index) + " >= D");
            if (have_feature && index <= last_index)
                parse_fail(path, line_no, "duplicate or unsorted feature index " +
                                              std::to_string(index));
            last_index = index;
            have_feature = true;
            if (value != 0.0) sample.features.entries.push_back({index, value});
        }
        if (raw.empty() && expected_samples == data.samples.size()) continue; // trailing newline
        data.samples.push_back(std::move(sample));
    }

    if (counted && data.samples.size() != expected_samples)
        throw std::runtime_error(path + ": header says " + std::to_string(expected_samples) +
                                 " samples, file has " + std::to_string(data.samples.size()));
    return data;
}

void write_sparse_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << data.samples.size() << " " << data.num_features << " " << data.num_labels << "\n";
    char buf[64];
    for (const Sample& s : data.samples) {
        for (size_t i = 0; i < s.labels.labels.size(); ++i) {
            if (i) out << ',';
            out << s.labels.labels[i];
        }
        for (const auto& e : s.features.entries) {
            std::snprintf(buf, sizeof(buf), " %u:%.17g", e.index, e.value);
            out << buf;
        }
        out << "\n";
    }
}

namespace {

Dataset parse_text_with(const std::string& text_file, const std::string& label_file,
                        const Vocabulary& vocab, uint32_t max_len, uint32_t num_labels) {
    std::ifstream text_in = open_or_throw(text_file);
    std::ifstream label_in = open_or_throw(label_file);

    Dataset data;
    data.num_labels = num_labels;
    data.vocab_size = vocab.size();
    data.num_features = vocab.size(); // BOW lives in vocab-id space

    std::string text_line, label_line;
    size_t line_no = 0;
    while (std::getline(text_in, text_line)) {
        ++line_no;
        if (!std::getline(label_in, label_line))
            throw std::runtime_error(label_file + ": fewer lines than " + text_file);
        Sample sample;
        std::istringstream ss(text_line);
        std::string tok;
        std::map<uint32_t, double> counts;
        uint32_t total = 0;
        while (ss >> tok) {
            uint32_t id = vocab.id_of(tok);
            ++total;
            if (sample.tokens.ids.size() < max_len) sample.tokens.ids.push_back(id);
            counts[id] += 1.0;
        }
        sample.tokens.original_length = total;
        for (const auto& [id, c] : counts) sample.features.entries.push_back({id, c});
        sample.labels = parse_label_field(label_line, num_labels, label_file, line_no);
        data.samples.push_back(std::move(sample));
    }
    if (std::getline(label_in, label_line))
        throw std::runtime_error(label_file + ": more lines than " + text_file);
    return data;
}

} // namespace

Dataset parse_text_dataset(const std::string& text_file, const std::string& label_file,
                           const Vocabulary& vocab, uint32_t max_len, uint32_t num_labels) {
    return parse_text_with(text_file, label_file, vocab, max_len, num_labels);
}

Dataset parse_text_dataset_build_vocab(const std::string& text_file,
                                       const std::string& label_file, uint32_t vocab_max,
                                       uint32_t max_len, uint32_t num_labels,
                                       Vocabulary* vocab_out) {
    std::ifstream in = open_or_throw(text_file);
    std::vector<std::string> docs;
    std::string line;
    while (std::getline(in, line)) docs.push_back(line);
    Vocabulary vocab = Vocabulary::build(docs, vocab_max);
    Dataset data = parse_text_with(text_file, label_file, vocab, max_len, num_labels);
    if (vocab_out) *vocab_out = std::move(vocab);
    return data;
}

void write_text_dataset(const Dataset& data, const Vocabulary& vocab,
                        const std::string& text_file, const std::string& label_file) {
    std::ofstream text_out(text_file), label_out(label_file);
    if (!text_out || !label_out) throw std::runtime_error("cannot write text dataset");
    for (const Sample& s : data.samples) {
        for (size_t i = 0; i < s.tokens.ids.size(); ++i) {
            if (i) text_out << ' ';
            text_out << vocab.token_of(s.tokens.ids[i]);
        }
        text_out << "\n";
        for (size_t i = 0; i < s.labels.labels.size(); ++i) {
            if (i) label_out << ',';
            label_out << s.labels.labels[i];
        }
        label_out << "\n";
    }
}

Dataset generate_synthetic(const SynthSpec& spec) {
    if (spec.num_labels == 0 || spec.num_clusters == 0 || spec.samples_per_cluster == 0 ||
        spec.vocab_size <= kReservedIds || spec.doc_len == 0)
        throw std::invalid_argument("synthetic spec fields must be positive");
    if (spec.num_labels % spec.num_clusters != 0)
        throw std::invalid_argument("num_labels must be divisible by num_clusters");
    const uint32_t usable_vocab = spec.vocab_size - kReservedIds;
    if (usable_vocab < spec.num_labels)
        throw std::invalid_argument("need at least one vocabulary token per label");

    const uint32_t L = spec.num_labels;
    const uint32_t per_cluster = L / spec.num_clusters;
    const uint32_t block = usable_vocab / L; // tokens owned by each label

    // cumulative power-law weights over the labels of one cluster
    std::vector<double> cum(per_cluster);
    double acc = 0.0;
    for (uint32_t r = 0; r < per_cluster; ++r) {
        acc += std::pow(static_cast<double>(r + 1), -spec.tail_skew);
        cum[r] = acc;
    }

    SplitMix64 rng(spec.seed);
    Dataset data;
    data.num_labels = L;
    data.vocab_size = spec.vocab_size;
    data.num_features = spec.vocab_size;

    const uint32_t total = spec.num_clusters * spec.samples_per_cluster;
    data.samples.reserve(total);
    for (uint32_t i = 0; i < total; ++i) {
        const uint32_t cluster = i % spec.num_clusters;
        const uint32_t base_label = cluster * per_cluster;

        // 1-5 distinct labels, power-law weighted within the cluster
        uint32_t want = 1 + static_cast<uint32_t>(rng.next_range(5));
        want = std::min(want, per_cluster);
        std::vector<uint32_t> chosen;
        while (chosen.size() < want) {
            double u = rng.next_double() * cum.back();
            uint32_t r = static_cast<uint32_t>(
                std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
            if (r >= per_cluster) r = per_cluster - 1;
            uint32_t label = base_label + r;
            if (std::find(chosen.begin(), chosen.end(), label) == chosen.end())
                chosen.push_back(label);
        }

        Sample sample;
        sample.labels = LabelSet::from_unsorted(chosen);

        std::map<uint32_t, double> counts;
        for (uint32_t t = 0; t < spec.doc_len; ++t) {
            uint32_t label;
            if (rng.next_double() < 0.9) {
                label = chosen[rng.next_range(chosen.size())];
            } else {
                // cluster-level noise: any label of the cluster
                label = base_label + static_cast<uint32_t>(rng.next_range(per_cluster));
            }
            uint32_t tok = kReservedIds + label * block +
                           static_cast<uint32_t>(rng.next_range(block));
            sample.tokens.ids.push_back(tok);
            counts[tok] += 1.0;
        }
        sample.tokens.original_length = spec.doc_len;
        for (const auto& [id, c] : counts) sample.features.entries.push_back({id, c});
        data.samples.push_back(std::move(sample));
    }
    return data;
}

} // namespace xmc
