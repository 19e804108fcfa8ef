// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace mmpunc {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// Word-level vocabulary. Immutable after build; ids are dense in [0, size),
// with <pad>=0 and <unk>=1 always present. Unknown lookups map to <unk>.
class Vocabulary {
public:
    Vocabulary();

    int id_of(const std::string& word) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    bool contains(const std::string& word) const { return index_.count(word) != 0; }

    // Plain text, one token per line, line number = id.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    // Appends a token with the next free id. Used by the builder.
    void push(const std::string& word);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> words;
};

// Words kept when their frequency is >= min_count; ids assigned by
// (frequency desc, lexicographic) order so builds are reproducible.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus, int min_count);

// Whitespace split and id mapping. The caller owns lowercasing and
// punctuation stripping (the data pipeline does both).
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);

}  // namespace mmpunc
