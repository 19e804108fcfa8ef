// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>

#include "mmpunc/error.hpp"
#include "mmpunc/metrics.hpp"
#include "mmpunc/rng.hpp"

using namespace mmpunc;

namespace {

std::vector<Label> random_labels(Rng& rng, std::size_t n) {
    std::vector<Label> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<Label>(rng.index(4)));
    return out;
}

// Independent counting oracle: per-class TP/FP/FN straight off the label
// arrays, no confusion matrix involved.
struct OracleCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, support = 0;
};

OracleCounts oracle_counts(const std::vector<std::vector<Label>>& refs,
                           const std::vector<std::vector<Label>>& hyps,
                           const std::vector<std::vector<std::uint8_t>>& masks, Label cls) {
    OracleCounts c;
    for (std::size_t s = 0; s < refs.size(); ++s) {
        for (std::size_t i = 0; i < refs[s].size(); ++i) {
            if (!masks[s][i]) continue;
            const bool is_ref = refs[s][i] == cls;
            const bool is_hyp = hyps[s][i] == cls;
            if (is_ref) ++c.support;
            if (is_ref && is_hyp) ++c.tp;
            if (!is_ref && is_hyp) ++c.fp;
            if (is_ref && !is_hyp) ++c.fn;
        }
    }
    return c;
}

double oracle_ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

TEST_CASE("confusion puts agreement on the diagonal") {
    std::vector<std::vector<Label>> refs{{Label::None, Label::Comma, Label::Question}};
    auto hyps = refs;
    std::vector<std::vector<std::uint8_t>> masks{{1, 1, 1}};
    Confusion c = confusion(refs, hyps, masks);
    CHECK(c.counts[0][0] == 1);
    CHECK(c.counts[1][1] == 1);
    CHECK(c.counts[3][3] == 1);
    CHECK(c.total() == 3);
}

TEST_CASE("confusion indexes ref by hyp") {
    std::vector<std::vector<Label>> refs{{Label::Comma}};
    std::vector<std::vector<Label>> hyps{{Label::FullStop}};
    std::vector<std::vector<std::uint8_t>> masks{{1}};
    Confusion c = confusion(refs, hyps, masks);
    CHECK(c.counts[1][2] == 1);
    CHECK(c.total() == 1);
}

TEST_CASE("confusion total equals the unmasked position count") {
    Rng rng(5);
    std::vector<std::vector<Label>> refs, hyps;
    std::vector<std::vector<std::uint8_t>> masks;
    std::uint64_t unmasked = 0;
    for (int s = 0; s < 20; ++s) {
        const std::size_t n = 50;
        refs.push_back(random_labels(rng, n));
        hyps.push_back(random_labels(rng, n));
        std::vector<std::uint8_t> m(n);
        for (auto& b : m) {
            b = rng.uniform() < 0.8 ? 1 : 0;
            unmasked += b;
        }
        masks.push_back(std::move(m));
    }
    CHECK(confusion(refs, hyps, masks).total() == unmasked);
}

TEST_CASE("confusion reports the offending sequence index on length mismatch") {
    std::vector<std::vector<Label>> refs{{Label::None}, {Label::None, Label::Comma}};
    std::vector<std::vector<Label>> hyps{{Label::None}, {Label::None}};
    std::vector<std::vector<std::uint8_t>> masks{{1}, {1, 1}};
    try {
        confusion(refs, hyps, masks);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("sequence 1") != std::string::npos);
    }
}

TEST_CASE("perfect predictions score ones everywhere") {
    Rng rng(9);
    std::vector<std::vector<Label>> refs;
    // Ensure every class appears at least once.
    refs.push_back({Label::None, Label::Comma, Label::FullStop, Label::Question});
    for (int s = 0; s < 5; ++s) refs.push_back(random_labels(rng, 20));
    auto hyps = refs;
    std::vector<std::vector<std::uint8_t>> masks;
    for (const auto& r : refs) masks.emplace_back(r.size(), 1);

    EvalReport rep = report(confusion(refs, hyps, masks));
    for (const ClassMetrics* m : {&rep.comma, &rep.full_stop, &rep.question, &rep.overall}) {
        CHECK(m->precision == 1.0);
        CHECK(m->recall == 1.0);
        CHECK(m->f1 == 1.0);
    }
    CHECK(rep.macro_f1 == 1.0);
}

TEST_CASE("half-recalled commas follow the hand-counted oracle") {
    std::vector<std::vector<Label>> refs{
        {Label::Comma, Label::Comma, Label::Comma, Label::Comma}};
    std::vector<std::vector<Label>> hyps{
        {Label::Comma, Label::Comma, Label::None, Label::None}};
    std::vector<std::vector<std::uint8_t>> masks{{1, 1, 1, 1}};
    EvalReport rep = report(confusion(refs, hyps, masks));
    CHECK(rep.comma.precision == 1.0);
    CHECK(rep.comma.recall == 0.5);
    CHECK(rep.comma.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.comma.support == 4);
}

TEST_CASE("a class absent from refs and hyps scores zero by convention") {
    std::vector<std::vector<Label>> refs{{Label::None, Label::Comma}};
    std::vector<std::vector<Label>> hyps{{Label::None, Label::Comma}};
    std::vector<std::vector<std::uint8_t>> masks{{1, 1}};
    EvalReport rep = report(confusion(refs, hyps, masks));
    CHECK(rep.question.precision == 0.0);
    CHECK(rep.question.recall == 0.0);
    CHECK(rep.question.f1 == 0.0);
    CHECK(rep.question.support == 0);
}

TEST_CASE("report agrees exactly with the brute-force counting oracle") {
    Rng rng(13);
    for (int pair = 0; pair < 100; ++pair) {
        std::vector<std::vector<Label>> refs, hyps;
        std::vector<std::vector<std::uint8_t>> masks;
        const std::size_t n_seqs = 1 + rng.index(5);
        for (std::size_t s = 0; s < n_seqs; ++s) {
            const std::size_t n = 1 + rng.index(30);
            refs.push_back(random_labels(rng, n));
            hyps.push_back(random_labels(rng, n));
            std::vector<std::uint8_t> m(n);
            for (auto& b : m) b = rng.uniform() < 0.9 ? 1 : 0;
            masks.push_back(std::move(m));
        }
        EvalReport rep = report(confusion(refs, hyps, masks));

        std::uint64_t micro_tp = 0, micro_fp = 0, micro_fn = 0;
        for (Label cls : {Label::Comma, Label::FullStop, Label::Question}) {
            OracleCounts oc = oracle_counts(refs, hyps, masks, cls);
            const ClassMetrics& m = rep.by_label(cls);
            CHECK(m.support == oc.support);
            const double p = oracle_ratio(oc.tp, oc.tp + oc.fp);
            const double r = oracle_ratio(oc.tp, oc.tp + oc.fn);
            CHECK(m.precision == p);
            CHECK(m.recall == r);
            CHECK(m.f1 == ((p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r)));
            micro_tp += oc.tp;
            micro_fp += oc.fp;
            micro_fn += oc.fn;
        }
        const double mp = oracle_ratio(micro_tp, micro_tp + micro_fp);
        const double mr = oracle_ratio(micro_tp, micro_tp + micro_fn);
        CHECK(rep.overall.precision == mp);
        CHECK(rep.overall.recall == mr);
        CHECK(rep.overall.f1 == ((mp + mr) == 0.0 ? 0.0 : 2.0 * mp * mr / (mp + mr)));
    }
}

TEST_CASE("metrics are invariant to sample order and batch splits") {
    Rng rng(17);
    std::vector<std::vector<Label>> refs, hyps;
    std::vector<std::vector<std::uint8_t>> masks;
    for (int s = 0; s < 12; ++s) {
        const std::size_t n = 5 + rng.index(20);
        refs.push_back(random_labels(rng, n));
        hyps.push_back(random_labels(rng, n));
        masks.emplace_back(n, 1);
    }
    EvalReport whole = report(confusion(refs, hyps, masks));

    auto slice = [](const auto& v, std::size_t a, std::size_t b) {
        return std::vector<typename std::decay_t<decltype(v)>::value_type>(v.begin() + a,
                                                                           v.begin() + b);
    };
    Confusion first = confusion(slice(refs, 0, 5), slice(hyps, 0, 5), slice(masks, 0, 5));
    Confusion second = confusion(slice(refs, 5, 12), slice(hyps, 5, 12), slice(masks, 5, 12));
    first.merge(second);
    EvalReport merged = report(first);
    CHECK(merged.overall.f1 == whole.overall.f1);
    CHECK(merged.comma.precision == whole.comma.precision);
    CHECK(merged.total_tokens == whole.total_tokens);

    std::vector<std::size_t> order{7, 2, 9, 0, 4, 11, 1, 3, 10, 6, 5, 8};
    std::vector<std::vector<Label>> r2, h2;
    std::vector<std::vector<std::uint8_t>> m2;
    for (std::size_t i : order) {
        r2.push_back(refs[i]);
        h2.push_back(hyps[i]);
        m2.push_back(masks[i]);
    }
    EvalReport shuffled = report(confusion(r2, h2, m2));
    CHECK(shuffled.overall.f1 == whole.overall.f1);
    CHECK(shuffled.macro_f1 == whole.macro_f1);
}
