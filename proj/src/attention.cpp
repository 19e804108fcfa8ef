// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/attention.hpp"

#include <cmath>

#include "mmpunc/error.hpp"

namespace mmpunc {

Tensor multi_head_attention(Graph& g, const Tensor& queries, const Tensor& keys,
                            const Tensor& values, std::span<const std::uint8_t> key_mask,
                            const AttentionParams& p, std::size_t heads,
                            AttentionTrace* trace) {
    const std::size_t d = queries.cols();
    if (heads == 0 || d % heads != 0) {
        throw ShapeError("attention: head count " + std::to_string(heads) +
                         " must divide model dimension " + std::to_string(d));
    }
    if (keys.cols() != d || values.cols() != d) {
        throw ShapeError("attention: query/key/value widths disagree: " + shape_str(queries) +
                         ", " + shape_str(keys) + ", " + shape_str(values));
    }
    if (keys.rows() != values.rows()) {
        throw ShapeError("attention: key and value counts disagree: " + shape_str(keys) +
                         " vs " + shape_str(values));
    }
    if (!key_mask.empty()) {
        if (key_mask.size() != keys.rows()) {
            throw ShapeError("attention: key mask length " + std::to_string(key_mask.size()) +
                             " does not match " + shape_str(keys));
        }
        bool any = false;
        for (std::uint8_t b : key_mask) any = any || (b != 0);
        if (!any) throw ValueError("attention: every key is masked");
    }

    const Tensor q = add_rowvec(g, matmul(g, queries, p.wq), p.bq);
    const Tensor k = add_rowvec(g, matmul(g, keys, p.wk), p.bk);
    const Tensor v = add_rowvec(g, matmul(g, values, p.wv), p.bv);

    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * dh, c1 = (h + 1) * dh;
        Tensor qh = slice_cols(g, q, c0, c1);
        Tensor kh = slice_cols(g, k, c0, c1);
        Tensor vh = slice_cols(g, v, c0, c1);
        Tensor scores = scale(g, matmul(g, qh, transpose(g, kh)), inv_sqrt_dh);
        if (!key_mask.empty()) scores = mask_scores(g, scores, key_mask);
        Tensor weights = softmax_rows(g, scores);
        if (trace) trace->head_weights.push_back(weights);
        head_outputs.push_back(matmul(g, weights, vh));
    }
    Tensor merged = heads == 1 ? head_outputs[0] : concat_cols(g, head_outputs);
    return add_rowvec(g, matmul(g, merged, p.wo), p.bo);
}

}  // namespace mmpunc
