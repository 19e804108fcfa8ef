// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmpunc/params.hpp"

namespace mmpunc {

// scale * d_model^(-1/2) * min(step^(-1/2), step * warmup^(-3/2)).
// Rises linearly to the peak at step == warmup, then decays as step^(-1/2).
double noam_lr(long step, std::size_t d_model, long warmup, double lr_scale);

// Scale that makes the Noam peak equal peak_lr.
double noam_scale_for_peak(double peak_lr, std::size_t d_model, long warmup);

struct AdamState {
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };
    std::map<std::string, Slot> slots;
    long t = 0;
};

AdamState make_adam_state(const ParamStore& params);

// Bias-corrected Adam update, in place, walking parameters in name order.
// Non-finite gradients abort with the offending parameter's name.
void adam_step(ParamStore& params, AdamState& state, double lr, double beta1, double beta2,
               double eps);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ParamStore& params, double max_norm);

}  // namespace mmpunc
