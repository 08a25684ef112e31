#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmc/data.hpp"

namespace xmc {

// Reserved token ids. Id 0 catches out-of-vocabulary tokens; id 1 is the
// batch filler used when token sequences are padded to a common length.
constexpr uint32_t kUnkId = 0;
constexpr uint32_t kPadId = 1;
constexpr uint32_t kReservedIds = 2;

class Vocabulary {
public:
    Vocabulary() = default;

    // Keeps the max_size most frequent tokens of the corpus, ties broken by
    // first occurrence. Kept tokens get ids starting at kReservedIds.
    static Vocabulary build(const std::vector<std::string>& documents, uint32_t max_size);

    // For tests and external id maps; entries map token -> id verbatim.
    static Vocabulary from_map(const std::unordered_map<std::string, uint32_t>& token_to_id);

    // kUnkId for unknown tokens.
    uint32_t id_of(const std::string& token) const;
    const std::string& token_of(uint32_t id) const;

    uint32_t size() const { return static_cast<uint32_t>(id_to_token_.size()); }
    uint32_t kept_tokens() const { return kept_; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::unordered_map<std::string, uint32_t> token_to_id_;
    std::vector<std::string> id_to_token_;
    uint32_t kept_ = 0;
};

// Repository sparse format: header "N D L", then one line per sample:
// comma-separated labels, then "index:value" feature pairs, zero-based.
Dataset parse_sparse_dataset(const std::string& path, bool header = true);
void write_sparse_dataset(const Dataset& data, const std::string& path);

// One whitespace-tokenized document per line in text_file; comma-separated
// label ids per aligned line in label_file. Tokens beyond max_len are cut
// (original_length keeps the full count); BOW features are token counts
// over vocabulary ids.
Dataset parse_text_dataset(const std::string& text_file, const std::string& label_file,
                           const Vocabulary& vocab, uint32_t max_len, uint32_t num_labels);

// Variant that builds the vocabulary from the text file first.
Dataset parse_text_dataset_build_vocab(const std::string& text_file,
                                       const std::string& label_file, uint32_t vocab_max,
                                       uint32_t max_len, uint32_t num_labels,
                                       Vocabulary* vocab_out);

void write_text_dataset(const Dataset& data, const Vocabulary& vocab,
                        const std::string& text_file, const std::string& label_file);

// Deterministic synthetic corpus. Labels are grouped into ground-truth
// clusters; each label owns a block of vocabulary tokens; a sample picks
// 1-5 labels from one cluster (power-law weighted by tail_skew) and draws
// tokens mostly from its labels' blocks. The seed fully determines output.
struct SynthSpec {
    uint32_t num_labels = 64;
    uint32_t num_clusters = 8;
    uint32_t samples_per_cluster = 500;
    uint32_t vocab_size = 160; // includes the two reserved ids
    double tail_skew = 1.0;    // 0 = uniform label frequencies
    uint32_t doc_len = 24;
    uint64_t seed = 1;
};

Dataset generate_synthetic(const SynthSpec& spec);

} // namespace xmc
