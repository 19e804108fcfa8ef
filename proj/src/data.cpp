// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/data.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmpunc/error.hpp"
#include "mmpunc/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mmpunc {

namespace {

std::optional<Label> trailing_mark(char c) {
    switch (c) {
        case ',':
            return Label::Comma;
        case '.':
            return Label::FullStop;
        case '?':
            return Label::Question;
        case '!':
        case ';':
            return Label::FullStop;
        case ':':
            return Label::Comma;
        default:
            return std::nullopt;
    }
}

std::string ascii_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool has_alnum(const std::string& s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) != 0; });
}

}  // namespace

const char* label_name(Label l) {
    switch (l) {
        case Label::None:
            return "NONE";
        case Label::Comma:
            return "COMMA";
        case Label::FullStop:
            return "FULLSTOP";
        case Label::Question:
            return "QUESTION";
    }
    return "?";
}

const char* label_mark(Label l) {
    switch (l) {
        case Label::None:
            return "";
        case Label::Comma:
            return ",";
        case Label::FullStop:
            return ".";
        case Label::Question:
            return "?";
    }
    return "";
}

std::pair<std::vector<std::string>, std::vector<Label>> derive_labels(
    const std::string& punctuated_text) {
    std::vector<std::string> words;
    std::vector<Label> labels;
    std::istringstream in(punctuated_text);
    std::string raw;
    while (in >> raw) {
        Label label = Label::None;
        if (auto mark = trailing_mark(raw.back())) {
            label = *mark;
            raw.pop_back();
        }
        if (raw.empty()) {
            // Free-standing mark: attach to the previous word, overwriting.
            // With no previous word there is nothing to attach to.
            if (!words.empty()) labels.back() = label;
            continue;
        }
        words.push_back(ascii_lower(raw));
        labels.push_back(label);
    }
    bool any_alnum = std::any_of(words.begin(), words.end(), has_alnum);
    if (!any_alnum) {
        throw ValueError("derive_labels: text contains no alphanumeric word: '" +
                         punctuated_text + "'");
    }
    return {std::move(words), std::move(labels)};
}

std::string render_labels(const std::vector<std::string>& words,
                          const std::vector<Label>& labels) {
    if (words.size() != labels.size()) {
        throw ShapeError("render_labels: " + std::to_string(words.size()) + " words vs " +
                         std::to_string(labels.size()) + " labels");
    }
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
        out += label_mark(labels[i]);
    }
    return out;
}

std::vector<Sample> load_corpus(const std::string& path, const Vocabulary& vocab,
                                const std::string& features_root) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path);
    const fs::path root =
        features_root.empty() ? fs::path(path).parent_path() : fs::path(features_root);

    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("corpus line " + where + ": invalid JSON: " + e.what());
        }
        if (!record.is_object()) throw FormatError("corpus line " + where + ": not an object");
        for (const auto& [key, value] : record.items()) {
            if (key != "text" && key != "audio") {
                throw FormatError("corpus line " + where + ": unknown field '" + key + "'");
            }
        }
        if (!record.contains("text") || !record["text"].is_string()) {
            throw FormatError("corpus line " + where + ": missing string field 'text'");
        }

        Sample s;
        std::vector<std::string> words;
        try {
            std::tie(words, s.labels) = derive_labels(record["text"].get<std::string>());
        } catch (const ValueError& e) {
            throw FormatError("corpus line " + where + ": " + e.what());
        }
        s.tokens.words = words;
        s.tokens.ids.reserve(words.size());
        for (const auto& w : words) s.tokens.ids.push_back(vocab.id_of(w));

        if (record.contains("audio")) {
            if (!record["audio"].is_string()) {
                throw FormatError("corpus line " + where + ": 'audio' must be a string path");
            }
            const fs::path feature_path = root / record["audio"].get<std::string>();
            if (!fs::exists(feature_path)) {
                throw IoError("corpus line " + where + ": feature file " +
                              feature_path.string() + " does not exist");
            }
            s.feature_path = feature_path.string();
            s.has_audio = true;
            try {
                s.features = std::make_shared<AcousticFeatures>(load_features(*s.feature_path));
            } catch (const Error& e) {
                throw FormatError("corpus line " + where + ": " + e.what());
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
    if (samples.empty()) throw ValueError("make_batches: empty sample list");
    if (batch_size < 1) throw ValueError("make_batches: batch size must be >= 1");

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(order);
    }

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, order.size());
        Batch b;
        b.size = end - start;
        for (std::size_t i = start; i < end; ++i) {
            b.max_len = std::max(b.max_len, samples[order[i]].tokens.ids.size());
        }
        for (std::size_t i = start; i < end; ++i) {
            const Sample& s = samples[order[i]];
            std::vector<int> ids(b.max_len, kPadId);
            std::vector<Label> labels(b.max_len, Label::None);
            std::vector<std::uint8_t> mask(b.max_len, 0);
            for (std::size_t j = 0; j < s.tokens.ids.size(); ++j) {
                ids[j] = s.tokens.ids[j];
                labels[j] = s.labels[j];
                mask[j] = 1;
            }
            b.ids.push_back(std::move(ids));
            b.labels.push_back(std::move(labels));
            b.mask.push_back(std::move(mask));
            b.features.push_back(s.features);
            b.has_audio.push_back(s.has_audio ? 1 : 0);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

CorpusStats corpus_stats(const std::vector<Sample>& samples) {
    CorpusStats st;
    st.sentences = samples.size();
    double word_total = 0.0;
    double audio_seconds = 0.0;
    for (const Sample& s : samples) {
        word_total += static_cast<double>(s.tokens.ids.size());
        if (s.has_audio && s.features) {
            ++st.with_audio;
            audio_seconds += s.features->seconds();
        }
    }
    if (st.sentences > 0) st.avg_sentence_len = word_total / static_cast<double>(st.sentences);
    if (st.with_audio > 0) {
        st.avg_audio_seconds = audio_seconds / static_cast<double>(st.with_audio);
    }
    return st;
}

}  // namespace mmpunc
