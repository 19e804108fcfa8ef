// SPDX-License-Identifier: Apache-2.0
//
// The full punctuation model: lexical transformer encoder, acoustic branch
// (strided-convolution downsampling or the learnable virtual embedding when
// a sample has no audio), stacked fusion layers combining lexical
// self-attention with lexical-to-acoustic cross-attention, and a linear
// per-token classifier over the four punctuation classes.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmpunc/attention.hpp"
#include "mmpunc/data.hpp"
#include "mmpunc/params.hpp"
#include "mmpunc/rng.hpp"

namespace mmpunc {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t encoder_layers = 2;
    std::size_t fusion_layers = 2;
    std::size_t d_ff = 0;  // 0 -> 4 * d_model
    std::size_t ve_len = 5;
    std::size_t feat_dim = 40;
    std::size_t conv_kernel = 15;
    std::size_t conv_stride = 5;
    double dropout = 0.1;
    bool position_encoding = true;

    std::size_t ff_dim() const { return d_ff ? d_ff : 4 * d_model; }
    // Shortest frame sequence the two-conv stack accepts (85 with defaults).
    std::size_t min_audio_frames() const {
        return conv_kernel + (conv_kernel - 1) * conv_stride;
    }
    std::size_t downsampled_len(std::size_t m) const;
    void validate() const;
    bool same_dims(const ModelConfig& other) const;
};

struct EncoderLayerParams {
    AttentionParams attn;
    Tensor ln1_gain, ln1_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln2_gain, ln2_bias;
};

struct FusionLayerParams {
    AttentionParams self_attn;
    AttentionParams cross_attn;
    Tensor ln_gain, ln_bias;
};

// forward/backward are single-threaded per instance; independent instances
// may run in parallel (e.g. for evaluation sharding).
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Sinusoidal table, [n x d], constant.
    static Tensor position_encoding(std::size_t n, std::size_t d);

    // Contextual embeddings for one padded sample, [n x d]. real_mask marks
    // non-PAD positions; PAD keys are excluded from every attention row.
    Tensor encode_sample(Graph& g, std::span<const int> ids,
                         std::span<const std::uint8_t> real_mask, bool training,
                         Rng* rng) const;
    // Whole batch, reshaped to [B x n x d].
    Tensor encode_batch(Graph& g, const Batch& batch, bool training, Rng* rng) const;

    // Two strided valid convolutions with ReLU, then a linear map into the
    // shared d_model space. [m x feat_dim] -> [m' x d].
    Tensor downsample(Graph& g, const Tensor& frames, bool training, Rng* rng) const;

    // Downsampled audio when present, the virtual embedding rows otherwise.
    // Audio-free samples all share the same learnable table.
    Tensor acoustic_embedding(Graph& g, const AcousticFeatures* features, bool has_audio,
                              bool training, Rng* rng) const;

    Tensor virtual_embedding() const { return virtual_embedding_; }

    // One fusion layer: self-attention over the lexical rows plus
    // cross-attention with lexical queries against acoustic keys/values,
    // summed with the residual input, then layer-normalized.
    Tensor fusion_layer(Graph& g, const Tensor& lexical_in, const Tensor& acoustic,
                        std::span<const std::uint8_t> real_mask, std::size_t layer,
                        bool training, Rng* rng) const;
    // All fusion layers stacked; acoustic keys/values are shared across layers.
    Tensor fuse(Graph& g, const Tensor& lexical, const Tensor& acoustic,
                std::span<const std::uint8_t> real_mask, bool training, Rng* rng) const;

    // [n x d] -> [n x 4] logits.
    Tensor classify(Graph& g, const Tensor& fused) const;

    Tensor forward_sample(Graph& g, std::span<const int> ids,
                          std::span<const std::uint8_t> real_mask,
                          const AcousticFeatures* features, bool has_audio, bool training,
                          Rng* rng) const;
    // Identical pipeline with a caller-supplied acoustic tensor in place of
    // the acoustic branch. Lets tests pin the acoustic side to any value.
    Tensor forward_with_acoustic(Graph& g, std::span<const int> ids,
                                 std::span<const std::uint8_t> real_mask,
                                 const Tensor& acoustic, bool training, Rng* rng) const;

    // Batch logits, [B x n x 4]. Output shape depends only on (B, n),
    // never on audio presence.
    Tensor forward_batch(Graph& g, const Batch& batch, bool training, Rng* rng) const;

    // Greedy per-token labels (argmax, ties toward the lowest class index),
    // dropout disabled. One row of batch.max_len labels per sample.
    std::vector<std::vector<Label>> predict(const Batch& batch) const;

    const EncoderLayerParams& encoder_layer_params(std::size_t i) const {
        return encoder_layers_.at(i);
    }
    const FusionLayerParams& fusion_layer_params(std::size_t i) const {
        return fusion_layers_.at(i);
    }

private:
    ModelConfig cfg_;
    ParamStore store_;

    Tensor embedding_;
    std::vector<EncoderLayerParams> encoder_layers_;
    Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, ac_proj_w_, ac_proj_b_;
    Tensor virtual_embedding_;
    std::vector<FusionLayerParams> fusion_layers_;
    Tensor cls_w_, cls_b_;

    AttentionParams make_attention(const std::string& prefix, Rng& rng);
};

}  // namespace mmpunc
