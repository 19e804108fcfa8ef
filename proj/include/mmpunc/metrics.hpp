// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mmpunc/data.hpp"

namespace mmpunc {

// 4x4 reference-by-hypothesis count matrix. Pure value type; merging is
// associative, so shards can be counted independently and combined.
struct Confusion {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

    void tally(Label ref, Label hyp) {
        ++counts[static_cast<std::size_t>(ref)][static_cast<std::size_t>(hyp)];
    }
    void merge(const Confusion& other);
    std::uint64_t total() const;
};

Confusion confusion(const std::vector<std::vector<Label>>& refs,
                    const std::vector<std::vector<Label>>& hyps,
                    const std::vector<std::vector<std::uint8_t>>& masks);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

// Per-class P/R/F1 for the three punctuation marks plus a micro-averaged
// overall row (None participates in the counts but has no reported row).
// 0/0 ratios resolve to 0.
struct EvalReport {
    ClassMetrics comma;
    ClassMetrics full_stop;
    ClassMetrics question;
    ClassMetrics overall;  // micro over the three mark classes
    double macro_f1 = 0.0;
    std::uint64_t total_tokens = 0;

    const ClassMetrics& by_label(Label l) const;
};

EvalReport report(const Confusion& c);

}  // namespace mmpunc
