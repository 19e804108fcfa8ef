// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/optim.hpp"

#include <algorithm>
#include <cmath>

#include "mmpunc/error.hpp"

namespace mmpunc {

double noam_lr(long step, std::size_t d_model, long warmup, double lr_scale) {
    if (step < 1) throw ValueError("noam_lr: step must be >= 1, got " + std::to_string(step));
    if (warmup < 1) throw ValueError("noam_lr: warmup must be >= 1");
    if (d_model == 0) throw ValueError("noam_lr: d_model must be >= 1");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(warmup);
    return lr_scale * std::pow(static_cast<double>(d_model), -0.5) *
           std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

double noam_scale_for_peak(double peak_lr, std::size_t d_model, long warmup) {
    return peak_lr * std::sqrt(static_cast<double>(d_model) * static_cast<double>(warmup));
}

AdamState make_adam_state(const ParamStore& params) {
    AdamState st;
    for (const auto& [name, t] : params.all()) {
        st.slots[name] = {std::vector<double>(t.numel(), 0.0),
                          std::vector<double>(t.numel(), 0.0)};
    }
    return st;
}

void adam_step(ParamStore& params, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params.all()) {
        auto slot_it = state.slots.find(name);
        if (slot_it == state.slots.end()) {
            throw Error("adam_step: no optimizer state for parameter '" + name + "'");
        }
        auto& slot = slot_it->second;
        Tensor param = p;  // shared handle
        const auto& g = param.grad();
        auto& values = param.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw ValueError("adam_step: non-finite gradient in parameter '" + name + "'");
            }
            slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g[i];
            slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

double clip_global_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : params.all()) {
        Tensor t = p;
        const auto& g = t.grad();
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (auto& [name, p] : params.all()) {
            Tensor t = p;
            for (double& v : t.grad()) v *= factor;
        }
    }
    return norm;
}

}  // namespace mmpunc
