// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over 2-D row-major tensors. Ops compute their result
// eagerly; when any input requires gradients they append a backward closure
// to the Graph tape. Graph::backward replays the tape once, in reverse
// execution order. Every op checks its output for NaN/Inf and throws instead
// of letting non-finite values propagate.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmpunc/tensor.hpp"

namespace mmpunc {

class Rng;

// One tape per forward pass. Graphs are not thread-safe and must not be
// shared across concurrent forward passes; tensors may be handed between
// threads once no backward pass is in flight.
class Graph {
public:
    void record(std::function<void()> backprop) { nodes_.push_back(std::move(backprop)); }

    // Seeds loss.grad with 1 and replays all recorded closures in reverse.
    // Calling twice without reset() is an error.
    void backward(const Tensor& loss);

    void reset();

    std::size_t size() const { return nodes_.size(); }
    // Number of closures executed by the last backward() — instrumentation
    // for the each-node-visited-exactly-once contract.
    std::size_t backward_visits() const { return visits_; }

private:
    std::vector<std::function<void()>> nodes_;
    bool backward_done_ = false;
    std::size_t visits_ = 0;
};

// a[n×k] · b[k×m] -> [n×m]
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(Graph& g, const Tensor& x);

// Valid (no padding) 1-D convolution.
// x[m×c_in], w[kernel×c_in×c_out], bias[c_out] -> [m'×c_out],
// m' = floor((m - kernel)/stride) + 1.
Tensor conv1d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride);

// Per-row normalization to mean 0 / variance 1 (epsilon 1e-5 inside the
// square root), then elementwise scale by gain and shift by bias.
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias);

// Row-gather: out[i] = table[ids[i]]. Backward scatter-adds into table.grad.
Tensor embedding_lookup(Graph& g, const Tensor& table, std::span<const int> ids);

// Mean of -log softmax(logits)[i, targets[i]] over positions where mask[i]
// is true. Returns a scalar; 0 with no gradient when everything is masked.
Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const int> targets,
                     std::span<const std::uint8_t> mask);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(Graph& g, const Tensor& x, double c);
// Broadcast-add a [d] row vector to every row of x[n×d].
Tensor add_rowvec(Graph& g, const Tensor& x, const Tensor& b);
Tensor relu(Graph& g, const Tensor& x);
Tensor transpose(Graph& g, const Tensor& x);
Tensor sum(Graph& g, const Tensor& x);  // -> scalar

// Inverted dropout: scales survivors by 1/(1-rate) while training, identity
// otherwise. rng must be non-null when training with rate > 0.
Tensor dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng);

Tensor concat_rows(Graph& g, std::span<const Tensor> parts);
Tensor slice_rows(Graph& g, const Tensor& x, std::size_t r0, std::size_t r1);
Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
Tensor slice_cols(Graph& g, const Tensor& x, std::size_t c0, std::size_t c1);

// Replaces scores[i][j] with a large negative constant wherever key_mask[j]
// is false, so softmax assigns those keys zero weight. Throws when every key
// is masked.
Tensor mask_scores(Graph& g, const Tensor& scores, std::span<const std::uint8_t> key_mask);

// Same data, new shape (element counts must agree).
Tensor reshape(Graph& g, const Tensor& x, std::vector<std::size_t> new_shape);

}  // namespace mmpunc
