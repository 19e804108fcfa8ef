// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mmpunc/error.hpp"
#include "mmpunc/checkpoint.hpp"
#include "mmpunc/ops.hpp"

using json = nlohmann::json;

namespace mmpunc {

namespace {

// Independent derived streams for batch order and dropout noise.
constexpr std::uint64_t kShuffleStream = 0x5348464cU;  // "SHFL"
constexpr std::uint64_t kDropoutStream = 0x44524f50U;  // "DROP"

void flatten_targets(const Batch& batch, std::vector<int>& targets,
                     std::vector<std::uint8_t>& mask) {
    targets.clear();
    mask.clear();
    for (std::size_t b = 0; b < batch.size; ++b) {
        for (std::size_t t = 0; t < batch.max_len; ++t) {
            targets.push_back(static_cast<int>(batch.labels[b][t]));
            mask.push_back(batch.mask[b][t]);
        }
    }
}

json class_json(const ClassMetrics& m) {
    return json{{"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1},
                {"support", m.support}};
}

void table_row(std::string& out, const char* name, const ClassMetrics& m) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %9.4f %9.4f %9.4f %9llu\n", name, m.precision,
                  m.recall, m.f1, static_cast<unsigned long long>(m.support));
    out += line;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("train: base lr must be positive");
    if (warmup_steps < 1) throw ConfigError("train: warmup must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train: dropout must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (max_steps < 1) throw ConfigError("train: max steps must be >= 1");
    if (eval_interval < 1) throw ConfigError("train: eval interval must be >= 1");
    if (start_step < 0 || start_step >= max_steps) {
        throw ConfigError("train: start step must lie in [0, max_steps)");
    }
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& samples,
                    std::size_t batch_size) {
    if (samples.empty()) throw ValueError("evaluate: empty corpus");
    Confusion total;
    for (const Batch& batch : make_batches(samples, batch_size, std::nullopt)) {
        const auto hyps = model.predict(batch);
        std::vector<std::vector<Label>> refs(batch.labels.begin(), batch.labels.end());
        total.merge(confusion(refs, hyps, batch.mask));
    }
    return report(total);
}

TrainResult train(Model& model, AdamState& opt, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& eval_set, const TrainConfig& cfg,
                  const TrainIo& io) {
    cfg.validate();
    if (train_set.empty()) throw ValueError("train: empty corpus");

    const std::size_t d_model = model.config().d_model;
    const double lr_scale = noam_scale_for_peak(cfg.base_lr, d_model, cfg.warmup_steps);
    const long batches_per_epoch =
        static_cast<long>((train_set.size() + cfg.batch_size - 1) / cfg.batch_size);

    std::ofstream metrics_out;
    if (!io.metrics_path.empty()) {
        metrics_out.open(io.metrics_path,
                         cfg.start_step == 0 ? std::ios::trunc : std::ios::app);
        if (!metrics_out) throw IoError("cannot write metric log " + io.metrics_path);
    }

    TrainResult result;
    std::vector<Batch> epoch_batches;
    long loaded_epoch = -1;
    double interval_loss = 0.0;
    long interval_count = 0;
    std::vector<int> targets;
    std::vector<std::uint8_t> mask;

    for (long step = cfg.start_step; step < cfg.max_steps; ++step) {
        const long epoch = step / batches_per_epoch;
        if (epoch != loaded_epoch) {
            epoch_batches = make_batches(train_set, cfg.batch_size,
                                         mix64(cfg.seed ^ kShuffleStream,
                                               static_cast<std::uint64_t>(epoch)));
            loaded_epoch = epoch;
        }
        const Batch& batch = epoch_batches[static_cast<std::size_t>(step % batches_per_epoch)];
        const double lr = noam_lr(step + 1, d_model, cfg.warmup_steps, lr_scale);

        Rng step_rng(mix64(cfg.seed ^ kDropoutStream, static_cast<std::uint64_t>(step)));
        model.params().zero_grads();
        Graph g;
        double loss_value = 0.0;
        try {
            Tensor logits = model.forward_batch(g, batch, /*training=*/true, &step_rng);
            Tensor flat =
                reshape(g, logits, {batch.size * batch.max_len, kNumClasses});
            flatten_targets(batch, targets, mask);
            Tensor loss = cross_entropy(g, flat, targets, mask);
            loss_value = loss.item();
            g.backward(loss);
        } catch (const ValueError& e) {
            throw Error("training aborted at step " + std::to_string(step + 1) +
                        " (lr=" + std::to_string(lr) + "): " + e.what());
        }
        if (!std::isfinite(loss_value)) {
            throw Error("training aborted at step " + std::to_string(step + 1) +
                        " (lr=" + std::to_string(lr) + "): non-finite loss");
        }

        clip_global_norm(model.params(), cfg.clip_norm);
        adam_step(model.params(), opt, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

        result.step_losses.push_back(loss_value);
        interval_loss += loss_value;
        ++interval_count;

        const bool last = (step + 1 == cfg.max_steps);
        if (!eval_set.empty() && (((step + 1) % cfg.eval_interval) == 0 || last)) {
            MetricEntry entry;
            entry.step = step + 1;
            entry.loss = interval_loss / static_cast<double>(interval_count);
            entry.lr = lr;
            entry.eval = evaluate(model, eval_set, cfg.batch_size);
            interval_loss = 0.0;
            interval_count = 0;
            if (metrics_out) {
                metrics_out << metric_entry_json(entry) << "\n";
                metrics_out.flush();
            }
            if (entry.eval.overall.f1 > result.best_overall_f1) {
                result.best_overall_f1 = entry.eval.overall.f1;
                if (!io.best_ckpt_path.empty()) {
                    save_checkpoint(io.best_ckpt_path, model, opt, step + 1, cfg.seed);
                }
            }
            result.metrics.push_back(std::move(entry));
        }
        if (last && !io.final_ckpt_path.empty()) {
            save_checkpoint(io.final_ckpt_path, model, opt, step + 1, cfg.seed);
        }
        result.final_step = step + 1;
    }
    return result;
}

std::string eval_report_json(const EvalReport& report) {
    json j{{"comma", class_json(report.comma)},
           {"full_stop", class_json(report.full_stop)},
           {"question", class_json(report.question)},
           {"overall",
            {{"precision", report.overall.precision},
             {"recall", report.overall.recall},
             {"f1", report.overall.f1},
             {"support", report.overall.support}}},
           {"macro_f1", report.macro_f1},
           {"total_tokens", report.total_tokens}};
    return j.dump();
}

std::string metric_entry_json(const MetricEntry& entry) {
    json j = json::parse(eval_report_json(entry.eval));
    j["step"] = entry.step;
    j["loss"] = entry.loss;
    j["lr"] = entry.lr;
    return j.dump();
}

std::string eval_report_table(const EvalReport& report, bool with_macro) {
    std::string out;
    char header[128];
    std::snprintf(header, sizeof(header), "%-10s %9s %9s %9s %9s\n", "class", "precision",
                  "recall", "f1", "support");
    out += header;
    table_row(out, label_name(Label::Comma), report.comma);
    table_row(out, label_name(Label::FullStop), report.full_stop);
    table_row(out, label_name(Label::Question), report.question);
    table_row(out, "OVERALL", report.overall);
    if (with_macro) {
        char line[64];
        std::snprintf(line, sizeof(line), "macro-F1   %9.4f\n", report.macro_f1);
        out += line;
    }
    return out;
}

}  // namespace mmpunc
