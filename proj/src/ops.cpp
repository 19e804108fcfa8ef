// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmpunc/error.hpp"
#include "mmpunc/rng.hpp"

namespace mmpunc {

namespace {

constexpr double kMaskFill = -1e30;

void check_finite(const char* op, const Tensor& t) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw ValueError(std::string(op) + " produced a non-finite value");
        }
    }
}

void require_2d(const char* op, const Tensor& t) {
    if (t.ndim() != 2) {
        throw ShapeError(std::string(op) + " requires a 2-D tensor, got " + shape_str(t));
    }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

bool out_grad_missing(const Tensor& out) { return !out.grad_allocated(); }

}  // namespace

void Graph::backward(const Tensor& loss) {
    if (backward_done_) {
        throw Error("backward already run on this graph; reset it (or zero grads and rebuild)");
    }
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got " + shape_str(loss));
    }
    backward_done_ = true;
    visits_ = 0;
    Tensor seed = loss;
    seed.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
        ++visits_;
    }
}

void Graph::reset() {
    nodes_.clear();
    backward_done_ = false;
    visits_ = 0;
}

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a) + " vs " +
                         shape_str(b));
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out = Tensor::zeros({n, m});
    {
        const auto& av = a.values();
        const auto& bv = b.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = av[i * k + kk];
                if (aik == 0.0) continue;
                const double* brow = &bv[kk * m];
                double* orow = &ov[i * m];
                for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
            }
        }
    }
    check_finite("matmul", out);
    if (a.requires_grad() || b.requires_grad()) {
        out.set_requires_grad(true);
        g.record([a, b, out, n, k, m]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            if (a.requires_grad()) {
                auto& ag = a.grad();
                const auto& bv = b.values();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* orow = &og[i * m];
                        const double* brow = &bv[kk * m];
                        for (std::size_t j = 0; j < m; ++j) acc += orow[j] * brow[j];
                        ag[i * k + kk] += acc;
                    }
                }
            }
            if (b.requires_grad()) {
                auto& bg = b.grad();
                const auto& av = a.values();
                for (std::size_t kk = 0; kk < k; ++kk) {
                    for (std::size_t i = 0; i < n; ++i) {
                        const double aik = av[i * k + kk];
                        if (aik == 0.0) continue;
                        const double* orow = &og[i * m];
                        double* brow = &bg[kk * m];
                        for (std::size_t j = 0; j < m; ++j) brow[j] += aik * orow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor softmax_rows(Graph& g, const Tensor& x) {
    require_2d("softmax_rows", x);
    const std::size_t n = x.rows(), m = x.cols();
    Tensor out = Tensor::zeros({n, m});
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &xv[i * m];
            double mx = row[0];
            for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double e = std::exp(row[j] - mx);
                ov[i * m + j] = e;
                s += e;
            }
            for (std::size_t j = 0; j < m; ++j) ov[i * m + j] /= s;
        }
    }
    check_finite("softmax_rows", out);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, n, m]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            const auto& yv = out.values();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += og[i * m + j] * yv[i * m + j];
                for (std::size_t j = 0; j < m; ++j) {
                    xg[i * m + j] += yv[i * m + j] * (og[i * m + j] - dot);
                }
            }
        });
    }
    return out;
}

Tensor conv1d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride) {
    require_2d("conv1d", x);
    if (w.ndim() != 3) {
        throw ShapeError("conv1d: weight must be [kernel x c_in x c_out], got " + shape_str(w));
    }
    if (stride < 1) throw ValueError("conv1d: stride must be >= 1");
    const std::size_t m = x.rows(), c_in = x.cols();
    const std::size_t kernel = w.shape()[0], w_cin = w.shape()[1], c_out = w.shape()[2];
    if (w_cin != c_in) {
        throw ShapeError("conv1d: input channels disagree: " + shape_str(x) + " vs " +
                         shape_str(w));
    }
    if (bias.ndim() != 1 || bias.shape()[0] != c_out) {
        throw ShapeError("conv1d: bias must be [" + std::to_string(c_out) + "], got " +
                         shape_str(bias));
    }
    if (m < kernel) {
        throw ValueError("conv1d: input too short: " + std::to_string(m) +
                         " frames, kernel needs " + std::to_string(kernel));
    }
    const std::size_t m_out = (m - kernel) / stride + 1;
    Tensor out = Tensor::zeros({m_out, c_out});
    {
        const auto& xv = x.values();
        const auto& wv = w.values();
        const auto& bv = bias.values();
        auto& ov = out.values();
        for (std::size_t t = 0; t < m_out; ++t) {
            double* orow = &ov[t * c_out];
            for (std::size_t oc = 0; oc < c_out; ++oc) orow[oc] = bv[oc];
            for (std::size_t kk = 0; kk < kernel; ++kk) {
                const double* xrow = &xv[(t * stride + kk) * c_in];
                const double* wrow = &wv[kk * c_in * c_out];
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    const double xval = xrow[ic];
                    if (xval == 0.0) continue;
                    const double* wcol = &wrow[ic * c_out];
                    for (std::size_t oc = 0; oc < c_out; ++oc) orow[oc] += xval * wcol[oc];
                }
            }
        }
    }
    check_finite("conv1d", out);
    if (x.requires_grad() || w.requires_grad() || bias.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, w, bias, out, stride, m_out, kernel, c_in, c_out]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            const auto& xv = x.values();
            const auto& wv = w.values();
            for (std::size_t t = 0; t < m_out; ++t) {
                const double* orow = &og[t * c_out];
                if (bias.requires_grad()) {
                    auto& bg = bias.grad();
                    for (std::size_t oc = 0; oc < c_out; ++oc) bg[oc] += orow[oc];
                }
                for (std::size_t kk = 0; kk < kernel; ++kk) {
                    const std::size_t xi = (t * stride + kk) * c_in;
                    if (x.requires_grad()) {
                        auto& xg = x.grad();
                        for (std::size_t ic = 0; ic < c_in; ++ic) {
                            const double* wcol = &wv[(kk * c_in + ic) * c_out];
                            double acc = 0.0;
                            for (std::size_t oc = 0; oc < c_out; ++oc) {
                                acc += orow[oc] * wcol[oc];
                            }
                            xg[xi + ic] += acc;
                        }
                    }
                    if (w.requires_grad()) {
                        auto& wg = w.grad();
                        for (std::size_t ic = 0; ic < c_in; ++ic) {
                            const double xval = xv[xi + ic];
                            if (xval == 0.0) continue;
                            double* wcol = &wg[(kk * c_in + ic) * c_out];
                            for (std::size_t oc = 0; oc < c_out; ++oc) {
                                wcol[oc] += xval * orow[oc];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require_2d("layer_norm", x);
    const std::size_t n = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) {
        throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
    }
    constexpr double kEps = 1e-5;
    Tensor out = Tensor::zeros({n, d});
    // Normalized rows are captured for the backward pass.
    std::vector<double> xhat(n * d);
    std::vector<double> inv_std(n);
    {
        const auto& xv = x.values();
        const auto& gv = gain.values();
        const auto& bv = bias.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &xv[i * d];
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += row[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double c = row[j] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double r = 1.0 / std::sqrt(var + kEps);
            inv_std[i] = r;
            for (std::size_t j = 0; j < d; ++j) {
                const double h = (row[j] - mean) * r;
                xhat[i * d + j] = h;
                ov[i * d + j] = h * gv[j] + bv[j];
            }
        }
    }
    check_finite("layer_norm", out);
    if (x.requires_grad() || gain.requires_grad() || bias.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, gain, bias, out, n, d, xhat = std::move(xhat),
                  inv_std = std::move(inv_std)]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            const auto& gv = gain.values();
            for (std::size_t i = 0; i < n; ++i) {
                const double* orow = &og[i * d];
                const double* hrow = &xhat[i * d];
                if (gain.requires_grad()) {
                    auto& gg = gain.grad();
                    for (std::size_t j = 0; j < d; ++j) gg[j] += orow[j] * hrow[j];
                }
                if (bias.requires_grad()) {
                    auto& bg = bias.grad();
                    for (std::size_t j = 0; j < d; ++j) bg[j] += orow[j];
                }
                if (x.requires_grad()) {
                    auto& xg = x.grad();
                    double sum_dh = 0.0, sum_dh_h = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dh = orow[j] * gv[j];
                        sum_dh += dh;
                        sum_dh_h += dh * hrow[j];
                    }
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dh = orow[j] * gv[j];
                        xg[i * d + j] +=
                            inv_std[i] * (dh - sum_dh * inv_d - hrow[j] * sum_dh_h * inv_d);
                    }
                }
            }
        });
    }
    return out;
}

Tensor embedding_lookup(Graph& g, const Tensor& table, std::span<const int> ids) {
    require_2d("embedding_lookup", table);
    if (ids.empty()) throw ShapeError("embedding_lookup: empty id sequence");
    const std::size_t v = table.rows(), d = table.cols();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
            throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) +
                             " out of range [0," + std::to_string(v) + ") at position " +
                             std::to_string(i));
        }
    }
    Tensor out = Tensor::zeros({ids.size(), d});
    {
        const auto& tv = table.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* src = &tv[static_cast<std::size_t>(ids[i]) * d];
            std::copy(src, src + d, &ov[i * d]);
        }
    }
    check_finite("embedding_lookup", out);
    if (table.requires_grad()) {
        out.set_requires_grad(true);
        std::vector<int> ids_copy(ids.begin(), ids.end());
        g.record([table, out, d, ids_copy = std::move(ids_copy)]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& tg = table.grad();
            for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                double* dst = &tg[static_cast<std::size_t>(ids_copy[i]) * d];
                const double* src = &og[i * d];
                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const int> targets,
                     std::span<const std::uint8_t> mask) {
    require_2d("cross_entropy", logits);
    const std::size_t n = logits.rows(), c = logits.cols();
    if (targets.size() != n || mask.size() != n) {
        throw ShapeError("cross_entropy: expected " + std::to_string(n) +
                         " targets and mask entries, got " + std::to_string(targets.size()) +
                         " and " + std::to_string(mask.size()));
    }
    std::size_t active = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        ++active;
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
            throw IndexError("cross_entropy: target " + std::to_string(targets[i]) +
                             " out of range [0," + std::to_string(c) + ") at position " +
                             std::to_string(i));
        }
    }
    if (active == 0) return Tensor::zeros({1});

    const auto& xv = logits.values();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const double* row = &xv[i * c];
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
        total += -(row[static_cast<std::size_t>(targets[i])] - mx - std::log(s));
    }
    Tensor out = Tensor::from({1}, {total / static_cast<double>(active)});
    check_finite("cross_entropy", out);
    if (logits.requires_grad()) {
        out.set_requires_grad(true);
        std::vector<int> t_copy(targets.begin(), targets.end());
        std::vector<std::uint8_t> m_copy(mask.begin(), mask.end());
        g.record([logits, out, n, c, active, t_copy = std::move(t_copy),
                  m_copy = std::move(m_copy)]() {
            if (out_grad_missing(out)) return;
            const double scale = out.grad()[0] / static_cast<double>(active);
            const auto& xv = logits.values();
            auto& xg = logits.grad();
            for (std::size_t i = 0; i < n; ++i) {
                if (!m_copy[i]) continue;
                const double* row = &xv[i * c];
                double mx = row[0];
                for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                double s = 0.0;
                for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
                for (std::size_t j = 0; j < c; ++j) {
                    double p = std::exp(row[j] - mx) / s;
                    double ind = (static_cast<std::size_t>(t_copy[i]) == j) ? 1.0 : 0.0;
                    xg[i * c + j] += scale * (p - ind);
                }
            }
        });
    }
    return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    {
        const auto& av = a.values();
        const auto& bv = b.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    }
    check_finite("add", out);
    if (a.requires_grad() || b.requires_grad()) {
        out.set_requires_grad(true);
        g.record([a, b, out]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            if (a.requires_grad()) {
                auto& ag = a.grad();
                for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
            }
            if (b.requires_grad()) {
                auto& bg = b.grad();
                for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
            }
        });
    }
    return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    {
        const auto& av = a.values();
        const auto& bv = b.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    }
    check_finite("mul", out);
    if (a.requires_grad() || b.requires_grad()) {
        out.set_requires_grad(true);
        g.record([a, b, out]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            if (a.requires_grad()) {
                auto& ag = a.grad();
                const auto& bv = b.values();
                for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i];
            }
            if (b.requires_grad()) {
                auto& bg = b.grad();
                const auto& av = a.values();
                for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * av[i];
            }
        });
    }
    return out;
}

Tensor scale(Graph& g, const Tensor& x, double c) {
    if (!std::isfinite(c)) throw ValueError("scale: factor must be finite");
    Tensor out = Tensor::zeros(x.shape());
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * c;
    }
    check_finite("scale", out);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, c]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i] * c;
        });
    }
    return out;
}

Tensor add_rowvec(Graph& g, const Tensor& x, const Tensor& b) {
    require_2d("add_rowvec", x);
    const std::size_t n = x.rows(), d = x.cols();
    if (b.numel() != d) {
        throw ShapeError("add_rowvec: vector " + shape_str(b) + " does not match row width of " +
                         shape_str(x));
    }
    Tensor out = Tensor::zeros({n, d});
    {
        const auto& xv = x.values();
        const auto& bv = b.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = xv[i * d + j] + bv[j];
        }
    }
    check_finite("add_rowvec", out);
    if (x.requires_grad() || b.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, b, out, n, d]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            if (x.requires_grad()) {
                auto& xg = x.grad();
                for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
            }
            if (b.requires_grad()) {
                auto& bg = b.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) bg[j] += og[i * d + j];
                }
            }
        });
    }
    return out;
}

Tensor relu(Graph& g, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    }
    check_finite("relu", out);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            const auto& xv = x.values();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) {
                if (xv[i] > 0.0) xg[i] += og[i];
            }
        });
    }
    return out;
}

Tensor transpose(Graph& g, const Tensor& x) {
    require_2d("transpose", x);
    const std::size_t n = x.rows(), m = x.cols();
    Tensor out = Tensor::zeros({m, n});
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) ov[j * n + i] = xv[i * m + j];
        }
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, n, m]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) xg[i * m + j] += og[j * n + i];
            }
        });
    }
    return out;
}

Tensor sum(Graph& g, const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    Tensor out = Tensor::from({1}, {total});
    check_finite("sum", out);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out]() {
            if (out_grad_missing(out)) return;
            const double og = out.grad()[0];
            auto& xg = x.grad();
            for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += og;
        });
    }
    return out;
}

Tensor dropout(Graph& g, const Tensor& x, double rate, bool training, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    if (rng == nullptr) throw ValueError("dropout: rng required while training");
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.numel());
    Tensor out = Tensor::zeros(x.shape());
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < ov.size(); ++i) {
            mask[i] = (rng->uniform() >= rate) ? keep_scale : 0.0;
            ov[i] = xv[i] * mask[i];
        }
    }
    check_finite("dropout", out);
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, mask = std::move(mask)]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i] * mask[i];
        });
    }
    return out;
}

Tensor concat_rows(Graph& g, std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no tensors given");
    const std::size_t d = parts[0].cols();
    std::size_t total = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        require_2d("concat_rows", p);
        if (p.cols() != d) {
            throw ShapeError("concat_rows: column counts disagree: " + shape_str(parts[0]) +
                             " vs " + shape_str(p));
        }
        total += p.rows();
        any_grad = any_grad || p.requires_grad();
    }
    Tensor out = Tensor::zeros({total, d});
    {
        auto& ov = out.values();
        std::size_t r = 0;
        for (const Tensor& p : parts) {
            const auto& pv = p.values();
            std::copy(pv.begin(), pv.end(), ov.begin() + static_cast<std::ptrdiff_t>(r * d));
            r += p.rows();
        }
    }
    if (any_grad) {
        out.set_requires_grad(true);
        std::vector<Tensor> held(parts.begin(), parts.end());
        g.record([held = std::move(held), out, d]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            std::size_t r = 0;
            for (const Tensor& p : held) {
                if (p.requires_grad()) {
                    auto& pg = p.grad();
                    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += og[r * d + i];
                }
                r += p.rows();
            }
        });
    }
    return out;
}

Tensor slice_rows(Graph& g, const Tensor& x, std::size_t r0, std::size_t r1) {
    require_2d("slice_rows", x);
    if (r0 >= r1 || r1 > x.rows()) {
        throw IndexError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") invalid for " + shape_str(x));
    }
    const std::size_t d = x.cols();
    Tensor out = Tensor::zeros({r1 - r0, d});
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        std::copy(xv.begin() + static_cast<std::ptrdiff_t>(r0 * d),
                  xv.begin() + static_cast<std::ptrdiff_t>(r1 * d), ov.begin());
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, r0, d]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) xg[r0 * d + i] += og[i];
        });
    }
    return out;
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no tensors given");
    const std::size_t n = parts[0].rows();
    std::size_t total = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        require_2d("concat_cols", p);
        if (p.rows() != n) {
            throw ShapeError("concat_cols: row counts disagree: " + shape_str(parts[0]) + " vs " +
                             shape_str(p));
        }
        total += p.cols();
        any_grad = any_grad || p.requires_grad();
    }
    Tensor out = Tensor::zeros({n, total});
    {
        auto& ov = out.values();
        std::size_t c = 0;
        for (const Tensor& p : parts) {
            const auto& pv = p.values();
            const std::size_t w = p.cols();
            for (std::size_t i = 0; i < n; ++i) {
                std::copy(pv.begin() + static_cast<std::ptrdiff_t>(i * w),
                          pv.begin() + static_cast<std::ptrdiff_t>((i + 1) * w),
                          ov.begin() + static_cast<std::ptrdiff_t>(i * total + c));
            }
            c += w;
        }
    }
    if (any_grad) {
        out.set_requires_grad(true);
        std::vector<Tensor> held(parts.begin(), parts.end());
        g.record([held = std::move(held), out, n, total]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            std::size_t c = 0;
            for (const Tensor& p : held) {
                const std::size_t w = p.cols();
                if (p.requires_grad()) {
                    auto& pg = p.grad();
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < w; ++j) {
                            pg[i * w + j] += og[i * total + c + j];
                        }
                    }
                }
                c += w;
            }
        });
    }
    return out;
}

Tensor slice_cols(Graph& g, const Tensor& x, std::size_t c0, std::size_t c1) {
    require_2d("slice_cols", x);
    if (c0 >= c1 || c1 > x.cols()) {
        throw IndexError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_str(x));
    }
    const std::size_t n = x.rows(), m = x.cols(), w = c1 - c0;
    Tensor out = Tensor::zeros({n, w});
    {
        const auto& xv = x.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(xv.begin() + static_cast<std::ptrdiff_t>(i * m + c0),
                      xv.begin() + static_cast<std::ptrdiff_t>(i * m + c1),
                      ov.begin() + static_cast<std::ptrdiff_t>(i * w));
        }
    }
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out, n, m, w, c0]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < w; ++j) xg[i * m + c0 + j] += og[i * w + j];
            }
        });
    }
    return out;
}

Tensor mask_scores(Graph& g, const Tensor& scores, std::span<const std::uint8_t> key_mask) {
    require_2d("mask_scores", scores);
    const std::size_t n = scores.rows(), m = scores.cols();
    if (key_mask.size() != m) {
        throw ShapeError("mask_scores: mask length " + std::to_string(key_mask.size()) +
                         " does not match key count of " + shape_str(scores));
    }
    bool any_valid = false;
    for (std::uint8_t b : key_mask) any_valid = any_valid || (b != 0);
    if (!any_valid) throw ValueError("mask_scores: every key is masked");
    Tensor out = Tensor::zeros({n, m});
    {
        const auto& xv = scores.values();
        auto& ov = out.values();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                ov[i * m + j] = key_mask[j] ? xv[i * m + j] : kMaskFill;
            }
        }
    }
    check_finite("mask_scores", out);
    if (scores.requires_grad()) {
        out.set_requires_grad(true);
        std::vector<std::uint8_t> mask_copy(key_mask.begin(), key_mask.end());
        g.record([scores, out, n, m, mask_copy = std::move(mask_copy)]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = scores.grad();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (mask_copy[j]) xg[i * m + j] += og[i * m + j];
                }
            }
        });
    }
    return out;
}

Tensor reshape(Graph& g, const Tensor& x, std::vector<std::size_t> new_shape) {
    std::size_t n = 1;
    for (std::size_t d : new_shape) n *= d;
    if (new_shape.empty() || n != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x) + " as " + shape_str(new_shape));
    }
    Tensor out = Tensor::from(std::move(new_shape), x.values());
    if (x.requires_grad()) {
        out.set_requires_grad(true);
        g.record([x, out]() {
            if (out_grad_missing(out)) return;
            const auto& og = out.grad();
            auto& xg = x.grad();
            for (std::size_t i = 0; i < og.size(); ++i) xg[i] += og[i];
        });
    }
    return out;
}

}  // namespace mmpunc
