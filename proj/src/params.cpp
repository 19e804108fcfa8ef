// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/params.hpp"

#include "mmpunc/error.hpp"

namespace mmpunc {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (params_.count(name)) throw Error("parameter '" + name + "' registered twice");
    t.set_requires_grad(true);
    t.zero_grad();
    params_.emplace(name, t);
    return t;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

}  // namespace mmpunc
