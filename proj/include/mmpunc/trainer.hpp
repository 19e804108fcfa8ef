// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmpunc/data.hpp"
#include "mmpunc/metrics.hpp"
#include "mmpunc/model.hpp"
#include "mmpunc/optim.hpp"

namespace mmpunc {

struct TrainConfig {
    double base_lr = 1e-5;    // peak learning rate of the Noam shape
    long warmup_steps = 8000;
    double dropout = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    std::size_t batch_size = 16;
    long max_steps = 1000;
    long eval_interval = 100;
    std::uint64_t seed = 1;
    long start_step = 0;  // nonzero when resuming from a checkpoint

    void validate() const;
};

struct MetricEntry {
    long step = 0;
    double loss = 0.0;  // mean training loss since the previous entry
    double lr = 0.0;
    EvalReport eval;
};

struct TrainIo {
    std::string metrics_path;     // JSON lines; empty = don't write
    std::string best_ckpt_path;   // written on overall-F1 improvement
    std::string final_ckpt_path;  // written after the last step
};

struct TrainResult {
    std::vector<double> step_losses;
    std::vector<MetricEntry> metrics;
    double best_overall_f1 = -1.0;
    long final_step = 0;
};

// Evaluates the model on a corpus: greedy predictions vs reference labels
// over all unmasked positions.
EvalReport evaluate(const Model& model, const std::vector<Sample>& samples,
                    std::size_t batch_size);

// The optimization loop: shuffled epoch batches, forward, masked
// cross-entropy, backward, global-norm clip, Adam with the Noam schedule.
// Batch composition and dropout streams are derived from (seed, epoch) and
// (seed, step), so a run resumed from a checkpoint replays exactly the same
// sequence as an uninterrupted one.
TrainResult train(Model& model, AdamState& opt, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& eval_set, const TrainConfig& cfg,
                  const TrainIo& io = {});

std::string metric_entry_json(const MetricEntry& entry);
std::string eval_report_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report, bool with_macro = false);

}  // namespace mmpunc
