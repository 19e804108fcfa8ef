// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/tensor.hpp"

#include <numeric>

#include "mmpunc/error.hpp"
#include "mmpunc/rng.hpp"

namespace mmpunc {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw ShapeError("tensor shape must have at least one dimension");
    }
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
        }
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Node& Tensor::n() {
    if (!node_) throw Error("use of an undefined tensor");
    return *node_;
}

const Tensor::Node& Tensor::n() const {
    if (!node_) throw Error("use of an undefined tensor");
    return *node_;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = checked_numel(shape);
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(n, 0.0);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = value;
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
    std::size_t n = checked_numel(shape);
    if (n != values.size()) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev,
                     bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

const std::vector<std::size_t>& Tensor::shape() const { return n().shape; }

std::size_t Tensor::numel() const { return n().value.size(); }

std::size_t Tensor::ndim() const { return n().shape.size(); }

std::size_t Tensor::rows() const { return n().shape.at(0); }

std::size_t Tensor::cols() const {
    const auto& s = n().shape;
    if (s.size() != 2) {
        throw ShapeError("cols() requires a 2-D tensor, got " + shape_str(s));
    }
    return s[1];
}

std::vector<double>& Tensor::values() { return n().value; }
const std::vector<double>& Tensor::values() const { return n().value; }

std::vector<double>& Tensor::grad() const {
    if (!node_) throw Error("use of an undefined tensor");
    Node& nd = *node_;
    if (nd.grad.empty()) nd.grad.assign(nd.value.size(), 0.0);
    return nd.grad;
}

bool Tensor::grad_allocated() const { return !n().grad.empty(); }

void Tensor::zero_grad() {
    Node& nd = n();
    nd.grad.assign(nd.value.size(), 0.0);
}

bool Tensor::requires_grad() const { return n().requires_grad; }

void Tensor::set_requires_grad(bool b) { n().requires_grad = b; }

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item() requires a scalar tensor, got " + shape_str(*this));
    }
    return n().value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return n().value[i * cols() + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return n().value[i * cols() + j];
}

Tensor Tensor::clone() const {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = n().shape;
    t.node_->value = n().value;
    t.node_->requires_grad = n().requires_grad;
    return t;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

std::string shape_str(const Tensor& t) { return shape_str(t.shape()); }

}  // namespace mmpunc
