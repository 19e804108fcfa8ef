// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file: magic "UPCK" | u32 version | u32 record count | records.
// Each record is a length-prefixed name, a u32 rank plus u32 dims, and an
// f64 little-endian payload. Parameters, Adam moments, dims, step counter,
// and seed material all round-trip bitwise.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmpunc/model.hpp"
#include "mmpunc/optim.hpp"

namespace mmpunc {

struct Checkpoint {
    ModelConfig config;
    long step = 0;
    std::uint64_t seed = 0;
    long adam_t = 0;
    std::map<std::string, Tensor> params;
    std::map<std::string, std::vector<double>> adam_m;
    std::map<std::string, std::vector<double>> adam_v;
};

// Writes to a temporary file and renames, so an aborted save never leaves a
// partial checkpoint behind.
void save_checkpoint(const std::string& path, const Model& model, const AdamState& opt,
                     long step, std::uint64_t seed);

Checkpoint read_checkpoint(const std::string& path);

// Copies checkpoint parameters and moments into an existing model/optimizer.
// Any missing record or shape disagreement is an error naming the parameter.
void apply_checkpoint(Model& model, AdamState& opt, const Checkpoint& cp);

// Convenience: construct a model from the stored config and restore it.
Model load_model(const Checkpoint& cp, AdamState& opt);

}  // namespace mmpunc
