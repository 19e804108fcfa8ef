// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mmpunc/error.hpp"

namespace mmpunc {

Vocabulary::Vocabulary() {
    push(kPadToken);
    push(kUnkToken);
}

void Vocabulary::push(const std::string& word) {
    if (index_.count(word)) throw Error("vocabulary already contains '" + word + "'");
    index_.emplace(word, static_cast<int>(tokens_.size()));
    tokens_.push_back(word);
}

int Vocabulary::id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw IndexError("vocabulary id " + std::to_string(id) + " out of range [0," +
                         std::to_string(tokens_.size()) + ")");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write vocabulary file " + path);
    for (const std::string& t : tokens_) out << t << "\n";
    if (!out) throw IoError("failed writing vocabulary file " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file " + path);
    Vocabulary v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (line_no == 0 && line != kPadToken) {
            throw FormatError("vocabulary file " + path + ": line 0 must be '" +
                              std::string(kPadToken) + "', got '" + line + "'");
        }
        if (line_no == 1 && line != kUnkToken) {
            throw FormatError("vocabulary file " + path + ": line 1 must be '" +
                              std::string(kUnkToken) + "', got '" + line + "'");
        }
        if (line_no >= 2) {
            if (line.empty()) {
                throw FormatError("vocabulary file " + path + ": empty token at line " +
                                  std::to_string(line_no));
            }
            v.push(line);
        }
        ++line_no;
    }
    if (line_no < 2) throw FormatError("vocabulary file " + path + ": missing reserved tokens");
    return v;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus, int min_count) {
    if (corpus.empty()) throw ValueError("build_vocabulary: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus) {
        for (const auto& word : sentence) ++counts[word];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [word, count] : counts) {
        if (count >= static_cast<std::size_t>(min_count)) kept.emplace_back(word, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [word, count] : kept) v.push(word);
    return v;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSequence seq;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        seq.words.push_back(word);
        seq.ids.push_back(vocab.id_of(word));
    }
    if (seq.ids.empty()) throw ValueError("tokenize: text contains no tokens");
    return seq;
}

}  // namespace mmpunc
