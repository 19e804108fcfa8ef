// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/model.hpp"

#include <cmath>

#include "mmpunc/error.hpp"

namespace mmpunc {

namespace {

constexpr double kInitStd = 0.02;

}  // namespace

std::size_t ModelConfig::downsampled_len(std::size_t m) const {
    const std::size_t m1 = (m - conv_kernel) / conv_stride + 1;
    return (m1 - conv_kernel) / conv_stride + 1;
}

void ModelConfig::validate() const {
    if (vocab_size < 2) throw ConfigError("model: vocab size must cover <pad> and <unk>");
    if (d_model == 0 || heads == 0 || d_model % heads != 0) {
        throw ConfigError("model: heads (" + std::to_string(heads) +
                          ") must divide d_model (" + std::to_string(d_model) + ")");
    }
    if (encoder_layers == 0 || fusion_layers == 0) {
        throw ConfigError("model: encoder and fusion layer counts must be >= 1");
    }
    if (ve_len == 0) throw ConfigError("model: virtual embedding length must be >= 1");
    if (feat_dim == 0) throw ConfigError("model: feature dimension must be >= 1");
    if (conv_kernel == 0 || conv_stride == 0) {
        throw ConfigError("model: conv kernel and stride must be >= 1");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("model: dropout must be in [0, 1)");
    }
}

bool ModelConfig::same_dims(const ModelConfig& other) const {
    return vocab_size == other.vocab_size && d_model == other.d_model &&
           heads == other.heads && encoder_layers == other.encoder_layers &&
           fusion_layers == other.fusion_layers && ff_dim() == other.ff_dim() &&
           ve_len == other.ve_len && feat_dim == other.feat_dim &&
           conv_kernel == other.conv_kernel && conv_stride == other.conv_stride &&
           position_encoding == other.position_encoding;
}

AttentionParams Model::make_attention(const std::string& prefix, Rng& rng) {
    const std::size_t d = cfg_.d_model;
    AttentionParams p;
    p.wq = store_.add(prefix + ".wq", Tensor::randn({d, d}, rng, kInitStd));
    p.bq = store_.add(prefix + ".bq", Tensor::zeros({d}));
    p.wk = store_.add(prefix + ".wk", Tensor::randn({d, d}, rng, kInitStd));
    p.bk = store_.add(prefix + ".bk", Tensor::zeros({d}));
    p.wv = store_.add(prefix + ".wv", Tensor::randn({d, d}, rng, kInitStd));
    p.bv = store_.add(prefix + ".bv", Tensor::zeros({d}));
    p.wo = store_.add(prefix + ".wo", Tensor::randn({d, d}, rng, kInitStd));
    p.bo = store_.add(prefix + ".bo", Tensor::zeros({d}));
    return p;
}

Model::Model(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    const std::size_t d = cfg_.d_model, ff = cfg_.ff_dim();

    embedding_ = store_.add("lex.embedding",
                            Tensor::randn({cfg_.vocab_size, d}, rng, kInitStd));

    for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
        const std::string prefix = "enc." + std::to_string(i);
        EncoderLayerParams lp;
        lp.attn = make_attention(prefix + ".attn", rng);
        lp.ln1_gain = store_.add(prefix + ".ln1.gain", Tensor::full({d}, 1.0));
        lp.ln1_bias = store_.add(prefix + ".ln1.bias", Tensor::zeros({d}));
        lp.ff_w1 = store_.add(prefix + ".ff.w1", Tensor::randn({d, ff}, rng, kInitStd));
        lp.ff_b1 = store_.add(prefix + ".ff.b1", Tensor::zeros({ff}));
        lp.ff_w2 = store_.add(prefix + ".ff.w2", Tensor::randn({ff, d}, rng, kInitStd));
        lp.ff_b2 = store_.add(prefix + ".ff.b2", Tensor::zeros({d}));
        lp.ln2_gain = store_.add(prefix + ".ln2.gain", Tensor::full({d}, 1.0));
        lp.ln2_bias = store_.add(prefix + ".ln2.bias", Tensor::zeros({d}));
        encoder_layers_.push_back(std::move(lp));
    }

    conv1_w_ = store_.add("ac.conv1.w",
                          Tensor::randn({cfg_.conv_kernel, cfg_.feat_dim, d}, rng, kInitStd));
    conv1_b_ = store_.add("ac.conv1.b", Tensor::zeros({d}));
    conv2_w_ = store_.add("ac.conv2.w",
                          Tensor::randn({cfg_.conv_kernel, d, d}, rng, kInitStd));
    conv2_b_ = store_.add("ac.conv2.b", Tensor::zeros({d}));
    ac_proj_w_ = store_.add("ac.proj.w", Tensor::randn({d, d}, rng, kInitStd));
    ac_proj_b_ = store_.add("ac.proj.b", Tensor::zeros({d}));
    virtual_embedding_ =
        store_.add("ac.virtual", Tensor::randn({cfg_.ve_len, d}, rng, kInitStd));

    for (std::size_t i = 0; i < cfg_.fusion_layers; ++i) {
        const std::string prefix = "fuse." + std::to_string(i);
        FusionLayerParams fp;
        fp.self_attn = make_attention(prefix + ".self", rng);
        fp.cross_attn = make_attention(prefix + ".cross", rng);
        fp.ln_gain = store_.add(prefix + ".ln.gain", Tensor::full({d}, 1.0));
        fp.ln_bias = store_.add(prefix + ".ln.bias", Tensor::zeros({d}));
        fusion_layers_.push_back(std::move(fp));
    }

    cls_w_ = store_.add("cls.w", Tensor::randn({d, kNumClasses}, rng, kInitStd));
    cls_b_ = store_.add("cls.b", Tensor::zeros({kNumClasses}));
}

Tensor Model::position_encoding(std::size_t n, std::size_t d) {
    Tensor pe = Tensor::zeros({n, d});
    auto& v = pe.values();
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            v[pos * d + i] = std::sin(angle);
            if (i + 1 < d) v[pos * d + i + 1] = std::cos(angle);
        }
    }
    return pe;
}

Tensor Model::encode_sample(Graph& g, std::span<const int> ids,
                            std::span<const std::uint8_t> real_mask, bool training,
                            Rng* rng) const {
    if (ids.empty()) throw ShapeError("encode: empty token sequence");
    if (ids.size() != real_mask.size()) {
        throw ShapeError("encode: " + std::to_string(ids.size()) + " ids vs " +
                         std::to_string(real_mask.size()) + " mask entries");
    }
    const double rate = cfg_.dropout;
    Tensor x = embedding_lookup(g, embedding_, ids);
    if (cfg_.position_encoding) {
        x = add(g, x, position_encoding(ids.size(), cfg_.d_model));
    }
    for (const EncoderLayerParams& lp : encoder_layers_) {
        Tensor attn_out =
            multi_head_attention(g, x, x, x, real_mask, lp.attn, cfg_.heads);
        x = layer_norm(g, add(g, x, dropout(g, attn_out, rate, training, rng)),
                       lp.ln1_gain, lp.ln1_bias);
        Tensor h = add_rowvec(g, matmul(g, x, lp.ff_w1), lp.ff_b1);
        h = relu(g, h);
        h = add_rowvec(g, matmul(g, h, lp.ff_w2), lp.ff_b2);
        x = layer_norm(g, add(g, x, dropout(g, h, rate, training, rng)), lp.ln2_gain,
                       lp.ln2_bias);
    }
    return x;
}

Tensor Model::encode_batch(Graph& g, const Batch& batch, bool training, Rng* rng) const {
    std::vector<Tensor> rows;
    rows.reserve(batch.size);
    for (std::size_t i = 0; i < batch.size; ++i) {
        rows.push_back(encode_sample(g, batch.ids[i], batch.mask[i], training, rng));
    }
    Tensor flat = concat_rows(g, rows);
    return reshape(g, flat, {batch.size, batch.max_len, cfg_.d_model});
}

Tensor Model::downsample(Graph& g, const Tensor& frames, bool training, Rng* rng) const {
    (void)training;
    (void)rng;
    if (frames.ndim() != 2 || frames.cols() != cfg_.feat_dim) {
        throw ShapeError("downsample: expected [m x " + std::to_string(cfg_.feat_dim) +
                         "] frames, got " + shape_str(frames));
    }
    if (frames.rows() < cfg_.min_audio_frames()) {
        throw ValueError("downsample: " + std::to_string(frames.rows()) +
                         " frames is too short for the conv stack; needs at least " +
                         std::to_string(cfg_.min_audio_frames()));
    }
    Tensor h = relu(g, conv1d(g, frames, conv1_w_, conv1_b_, cfg_.conv_stride));
    h = relu(g, conv1d(g, h, conv2_w_, conv2_b_, cfg_.conv_stride));
    return add_rowvec(g, matmul(g, h, ac_proj_w_), ac_proj_b_);
}

Tensor Model::acoustic_embedding(Graph& g, const AcousticFeatures* features, bool has_audio,
                                 bool training, Rng* rng) const {
    if (has_audio && features == nullptr) {
        throw Error("acoustic_embedding: sample flagged has_audio without features");
    }
    if (!has_audio && features != nullptr) {
        throw Error("acoustic_embedding: features supplied for an audio-free sample");
    }
    if (has_audio) return downsample(g, features->frames, training, rng);
    return virtual_embedding_;
}

Tensor Model::fusion_layer(Graph& g, const Tensor& lexical_in, const Tensor& acoustic,
                           std::span<const std::uint8_t> real_mask, std::size_t layer,
                           bool training, Rng* rng) const {
    const FusionLayerParams& fp = fusion_layers_.at(layer);
    const double rate = cfg_.dropout;
    Tensor s_lex = multi_head_attention(g, lexical_in, lexical_in, lexical_in, real_mask,
                                        fp.self_attn, cfg_.heads);
    Tensor s_ac = multi_head_attention(g, lexical_in, acoustic, acoustic, {}, fp.cross_attn,
                                       cfg_.heads);
    Tensor summed = add(g,
                        add(g, dropout(g, s_lex, rate, training, rng),
                            dropout(g, s_ac, rate, training, rng)),
                        lexical_in);
    return layer_norm(g, summed, fp.ln_gain, fp.ln_bias);
}

Tensor Model::fuse(Graph& g, const Tensor& lexical, const Tensor& acoustic,
                   std::span<const std::uint8_t> real_mask, bool training, Rng* rng) const {
    Tensor x = lexical;
    for (std::size_t i = 0; i < cfg_.fusion_layers; ++i) {
        x = fusion_layer(g, x, acoustic, real_mask, i, training, rng);
    }
    return x;
}

Tensor Model::classify(Graph& g, const Tensor& fused) const {
    return add_rowvec(g, matmul(g, fused, cls_w_), cls_b_);
}

Tensor Model::forward_sample(Graph& g, std::span<const int> ids,
                             std::span<const std::uint8_t> real_mask,
                             const AcousticFeatures* features, bool has_audio, bool training,
                             Rng* rng) const {
    Tensor acoustic = acoustic_embedding(g, features, has_audio, training, rng);
    Tensor lexical = encode_sample(g, ids, real_mask, training, rng);
    return classify(g, fuse(g, lexical, acoustic, real_mask, training, rng));
}

Tensor Model::forward_with_acoustic(Graph& g, std::span<const int> ids,
                                    std::span<const std::uint8_t> real_mask,
                                    const Tensor& acoustic, bool training, Rng* rng) const {
    Tensor lexical = encode_sample(g, ids, real_mask, training, rng);
    return classify(g, fuse(g, lexical, acoustic, real_mask, training, rng));
}

Tensor Model::forward_batch(Graph& g, const Batch& batch, bool training, Rng* rng) const {
    if (batch.size == 0) throw ValueError("forward: empty batch");
    std::vector<Tensor> per_sample;
    per_sample.reserve(batch.size);
    for (std::size_t i = 0; i < batch.size; ++i) {
        per_sample.push_back(forward_sample(g, batch.ids[i], batch.mask[i],
                                            batch.features[i].get(), batch.has_audio[i] != 0,
                                            training, rng));
    }
    Tensor flat = concat_rows(g, per_sample);
    return reshape(g, flat, {batch.size, batch.max_len, kNumClasses});
}

std::vector<std::vector<Label>> Model::predict(const Batch& batch) const {
    Graph g;
    Tensor logits = forward_batch(g, batch, false, nullptr);
    const auto& v = logits.values();
    std::vector<std::vector<Label>> out(batch.size);
    for (std::size_t b = 0; b < batch.size; ++b) {
        out[b].reserve(batch.max_len);
        for (std::size_t t = 0; t < batch.max_len; ++t) {
            const double* row = &v[(b * batch.max_len + t) * kNumClasses];
            std::size_t best = 0;
            for (std::size_t c = 1; c < kNumClasses; ++c) {
                if (row[c] > row[best]) best = c;
            }
            out[b].push_back(static_cast<Label>(best));
        }
    }
    return out;
}

}  // namespace mmpunc
