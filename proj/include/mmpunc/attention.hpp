// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmpunc/ops.hpp"
#include "mmpunc/tensor.hpp"

namespace mmpunc {

// Learned projections for one attention block. All matrices are [d x d]
// composites across heads; biases are [d].
struct AttentionParams {
    Tensor wq, bq;
    Tensor wk, bk;
    Tensor wv, bv;
    Tensor wo, bo;
};

// Optional capture of the post-softmax attention weights, one [nq x nk]
// tensor per head. Test instrumentation.
struct AttentionTrace {
    std::vector<Tensor> head_weights;
};

// Scaled dot-product attention with learned projections: per head,
// softmax(q k^T / sqrt(d/heads)) v, heads concatenated and output-projected.
// key_mask (empty = all keys valid) excludes keys from every query row by
// forcing their pre-softmax scores to a -inf equivalent.
Tensor multi_head_attention(Graph& g, const Tensor& queries, const Tensor& keys,
                            const Tensor& values, std::span<const std::uint8_t> key_mask,
                            const AttentionParams& p, std::size_t heads,
                            AttentionTrace* trace = nullptr);

}  // namespace mmpunc
