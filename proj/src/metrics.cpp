// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/metrics.hpp"

#include "mmpunc/error.hpp"

namespace mmpunc {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

ClassMetrics class_metrics(const Confusion& c, std::size_t k) {
    std::uint64_t tp = c.counts[k][k];
    std::uint64_t ref_total = 0, hyp_total = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        ref_total += c.counts[k][i];
        hyp_total += c.counts[i][k];
    }
    ClassMetrics m;
    m.support = ref_total;
    m.precision = ratio(tp, hyp_total);
    m.recall = ratio(tp, ref_total);
    m.f1 = f1_of(m.precision, m.recall);
    return m;
}

}  // namespace

void Confusion::merge(const Confusion& other) {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        for (std::size_t j = 0; j < kNumClasses; ++j) counts[i][j] += other.counts[i][j];
    }
}

std::uint64_t Confusion::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts) {
        for (std::uint64_t v : row) t += v;
    }
    return t;
}

Confusion confusion(const std::vector<std::vector<Label>>& refs,
                    const std::vector<std::vector<Label>>& hyps,
                    const std::vector<std::vector<std::uint8_t>>& masks) {
    if (refs.size() != hyps.size() || refs.size() != masks.size()) {
        throw ShapeError("confusion: sequence counts disagree: " + std::to_string(refs.size()) +
                         " refs, " + std::to_string(hyps.size()) + " hyps, " +
                         std::to_string(masks.size()) + " masks");
    }
    Confusion c;
    for (std::size_t s = 0; s < refs.size(); ++s) {
        if (refs[s].size() != hyps[s].size() || refs[s].size() != masks[s].size()) {
            throw ShapeError("confusion: length mismatch at sequence " + std::to_string(s) +
                             ": " + std::to_string(refs[s].size()) + " refs vs " +
                             std::to_string(hyps[s].size()) + " hyps vs " +
                             std::to_string(masks[s].size()) + " mask entries");
        }
        for (std::size_t i = 0; i < refs[s].size(); ++i) {
            if (masks[s][i]) c.tally(refs[s][i], hyps[s][i]);
        }
    }
    return c;
}

const ClassMetrics& EvalReport::by_label(Label l) const {
    switch (l) {
        case Label::Comma:
            return comma;
        case Label::FullStop:
            return full_stop;
        case Label::Question:
            return question;
        default:
            throw IndexError("EvalReport: no reported row for label NONE");
    }
}

EvalReport report(const Confusion& c) {
    EvalReport r;
    r.comma = class_metrics(c, static_cast<std::size_t>(Label::Comma));
    r.full_stop = class_metrics(c, static_cast<std::size_t>(Label::FullStop));
    r.question = class_metrics(c, static_cast<std::size_t>(Label::Question));
    r.total_tokens = c.total();

    // Micro average: sum TP/FP/FN over the three mark classes, None excluded.
    std::uint64_t tp = 0, hyp_total = 0, ref_total = 0;
    for (Label l : {Label::Comma, Label::FullStop, Label::Question}) {
        const std::size_t k = static_cast<std::size_t>(l);
        tp += c.counts[k][k];
        for (std::size_t i = 0; i < kNumClasses; ++i) {
            ref_total += c.counts[k][i];
            hyp_total += c.counts[i][k];
        }
    }
    r.overall.support = ref_total;
    r.overall.precision = ratio(tp, hyp_total);
    r.overall.recall = ratio(tp, ref_total);
    r.overall.f1 = f1_of(r.overall.precision, r.overall.recall);
    r.macro_f1 = (r.comma.f1 + r.full_stop.f1 + r.question.f1) / 3.0;
    return r;
}

}  // namespace mmpunc
