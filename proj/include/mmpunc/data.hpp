// SPDX-License-Identifier: Apache-2.0
//
// Corpus ingestion: punctuated text in, labeled samples and padded
// mixed-modality batches out.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmpunc/features.hpp"
#include "mmpunc/vocab.hpp"

namespace mmpunc {

enum class Label : int { None = 0, Comma = 1, FullStop = 2, Question = 3 };

inline constexpr std::size_t kNumClasses = 4;

const char* label_name(Label l);
// "" for None, otherwise the mark character.
const char* label_mark(Label l);

struct Sample {
    TokenSequence tokens;
    std::vector<Label> labels;  // one per token
    std::optional<std::string> feature_path;
    bool has_audio = false;
    std::shared_ptr<const AcousticFeatures> features;  // loaded when has_audio
};

struct Batch {
    std::size_t size = 0;     // B
    std::size_t max_len = 0;  // n, the padded length
    std::vector<std::vector<int>> ids;            // B rows of n (PAD-filled)
    std::vector<std::vector<Label>> labels;       // B rows of n (None-filled)
    std::vector<std::vector<std::uint8_t>> mask;  // true at real tokens
    std::vector<std::shared_ptr<const AcousticFeatures>> features;  // null when absent
    std::vector<std::uint8_t> has_audio;
};

// Splits punctuated text into (lowercased words, labels). One trailing mark
// per word is stripped and recorded; free-standing marks merge their label
// onto the previous word, later marks overwriting earlier ones. "!" and ";"
// count as full stops, ":" as a comma.
std::pair<std::vector<std::string>, std::vector<Label>> derive_labels(
    const std::string& punctuated_text);

// Inverse of derive_labels for clean word sequences: mark appended directly
// after its word, words joined by single spaces.
std::string render_labels(const std::vector<std::string>& words,
                          const std::vector<Label>& labels);

// JSON-lines corpus: {"text": "...", "audio": "relative/path.upft"?}.
// Feature paths resolve against features_root (empty = corpus directory);
// declared feature files are loaded eagerly so dangling paths fail here,
// with the offending line number.
std::vector<Sample> load_corpus(const std::string& path, const Vocabulary& vocab,
                                const std::string& features_root = "");

// Greedy fixed-size batching after an optional seeded shuffle. Padding uses
// PAD ids, None labels, and a false loss mask.
std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed);

struct CorpusStats {
    std::size_t sentences = 0;
    std::size_t with_audio = 0;
    double avg_sentence_len = 0.0;
    std::optional<double> avg_audio_seconds;
};

CorpusStats corpus_stats(const std::vector<Sample>& samples);

}  // namespace mmpunc
