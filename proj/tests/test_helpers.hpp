// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities. The finite-difference checker is the independent
// oracle for every gradient assertion: it re-evaluates the caller's loss
// closure with perturbed inputs and never touches the recorded tape.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mmpunc/ops.hpp"
#include "mmpunc/tensor.hpp"

namespace mmtest {

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Central differences with step h against one recorded backward pass.
// loss_fn must rebuild the graph from the current input values on each call.
inline GradCheck check_gradients(const std::function<mmpunc::Tensor(mmpunc::Graph&)>& loss_fn,
                                 const std::vector<mmpunc::Tensor>& inputs, double h = 1e-5) {
    for (const mmpunc::Tensor& t : inputs) {
        mmpunc::Tensor handle = t;
        handle.zero_grad();
    }
    {
        mmpunc::Graph g;
        mmpunc::Tensor loss = loss_fn(g);
        g.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const mmpunc::Tensor& t : inputs) analytic.push_back(t.grad());

    GradCheck result;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        mmpunc::Tensor t = inputs[ti];
        auto& vals = t.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double x0 = vals[i];
            vals[i] = x0 + h;
            mmpunc::Graph gp;
            const double fp = loss_fn(gp).item();
            vals[i] = x0 - h;
            mmpunc::Graph gm;
            const double fm = loss_fn(gm).item();
            vals[i] = x0;
            const double fd = (fp - fm) / (2.0 * h);
            result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic[ti][i], fd));
            ++result.checked;
        }
    }
    return result;
}

}  // namespace mmtest
