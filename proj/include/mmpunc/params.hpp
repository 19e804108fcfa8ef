// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "mmpunc/tensor.hpp"

namespace mmpunc {

// All learnable tensors, addressed by stable string names. The map is
// ordered so optimizer updates, norm reductions, and checkpoint records
// always walk parameters in the same sequence.
class ParamStore {
public:
    // Registers a tensor, marks it trainable, and returns the shared handle.
    Tensor add(const std::string& name, Tensor t);

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grads();
    std::size_t total_elements() const;

    const std::map<std::string, Tensor>& all() const { return params_; }

private:
    std::map<std::string, Tensor> params_;
};

}  // namespace mmpunc
