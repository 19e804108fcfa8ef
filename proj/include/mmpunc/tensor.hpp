// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit float tensor with shared storage. A Tensor is a cheap handle:
// copies alias the same data and gradient buffers, which is what lets
// backward closures recorded during the forward pass accumulate gradients
// into the tensors the caller still holds.
#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace mmpunc {

class Rng;

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }

    const std::vector<std::size_t>& shape() const;
    std::size_t numel() const;
    // 2-D helpers; rows() works for any rank (first dimension).
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t ndim() const;

    std::vector<double>& values();
    const std::vector<double>& values() const;

    // The gradient is an accumulation buffer shared across handles, so it is
    // reachable through const handles too. Allocated (zero-filled) on first
    // access.
    std::vector<double>& grad() const;
    bool grad_allocated() const;
    void zero_grad();

    bool requires_grad() const;
    void set_requires_grad(bool b);

    double item() const;  // scalar tensors only
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j);

    // Deep copy with fresh storage; gradient buffer is not copied.
    Tensor clone() const;

    // True when both handles alias the same storage.
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<double> value;
        std::vector<double> grad;  // empty until first use
        bool requires_grad = false;
    };

    std::shared_ptr<Node> node_;

    Node& n();
    const Node& n() const;
};

// "[3x4]" style shape rendering for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);
std::string shape_str(const Tensor& t);

}  // namespace mmpunc
