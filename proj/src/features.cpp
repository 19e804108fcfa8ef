// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mmpunc/error.hpp"

namespace mmpunc {

namespace {

constexpr char kMagic[4] = {'U', 'P', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr double kLogFloor = 1e-10;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

std::uint32_t get_u32(const std::string& buf, std::size_t& off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    }
    off += 4;
    return v;
}

float get_f32(const std::string& buf, std::size_t& off) {
    std::uint32_t bits = get_u32(buf, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

void write_features(const std::string& path, const AcousticFeatures& features) {
    if (features.frames.ndim() != 2) {
        throw ShapeError("write_features: frames must be 2-D, got " + shape_str(features.frames));
    }
    if (!(features.frame_rate_hz > 0.0)) {
        throw ValueError("write_features: frame rate must be positive");
    }
    const std::size_t rows = features.frames.rows(), cols = features.frames.cols();
    std::string buf;
    buf.reserve(20 + rows * cols * 4);
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(rows));
    put_u32(buf, static_cast<std::uint32_t>(cols));
    put_f32(buf, static_cast<float>(features.frame_rate_hz));
    for (double v : features.frames.values()) put_f32(buf, static_cast<float>(v));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write feature file " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing feature file " + path);
}

AcousticFeatures load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 20) throw FormatError("feature file " + path + ": truncated header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw FormatError("feature file " + path + ": bad magic bytes");
    }
    std::size_t off = 4;
    const std::uint32_t version = get_u32(buf, off);
    if (version != kVersion) {
        throw FormatError("feature file " + path + ": unsupported version " +
                          std::to_string(version));
    }
    const std::uint32_t rows = get_u32(buf, off);
    const std::uint32_t cols = get_u32(buf, off);
    const double rate = static_cast<double>(get_f32(buf, off));
    if (rows == 0 || cols == 0) {
        throw FormatError("feature file " + path + ": declared shape " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " is empty");
    }
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw FormatError("feature file " + path + ": frame rate must be positive and finite");
    }
    const std::size_t expected = 20 + static_cast<std::size_t>(rows) * cols * 4;
    if (buf.size() != expected) {
        throw FormatError("feature file " + path + ": payload length " +
                          std::to_string(buf.size() - 20) + " bytes does not match declared " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::vector<double> values(static_cast<std::size_t>(rows) * cols);
    for (double& v : values) {
        v = static_cast<double>(get_f32(buf, off));
        if (!std::isfinite(v)) {
            throw FormatError("feature file " + path + ": non-finite frame value");
        }
    }
    AcousticFeatures f;
    f.frames = Tensor::from({rows, cols}, std::move(values));
    f.frame_rate_hz = rate;
    return f;
}

AcousticFeatures logmel(const std::vector<double>& waveform, int sample_rate, int n_mels,
                        double win_ms, double hop_ms) {
    if (sample_rate <= 0) throw ValueError("logmel: sample rate must be positive");
    if (n_mels < 1) throw ValueError("logmel: n_mels must be >= 1");
    const std::size_t win = static_cast<std::size_t>(
        std::lround(win_ms * static_cast<double>(sample_rate) / 1000.0));
    const std::size_t hop = static_cast<std::size_t>(
        std::lround(hop_ms * static_cast<double>(sample_rate) / 1000.0));
    if (win < 2 || hop < 1) throw ValueError("logmel: window/hop too small");
    if (waveform.size() < win) {
        throw ValueError("logmel: waveform of " + std::to_string(waveform.size()) +
                         " samples is shorter than one " + std::to_string(win) +
                         "-sample window");
    }
    const std::size_t n_frames = (waveform.size() - win) / hop + 1;
    const std::size_t n_bins = win / 2 + 1;
    const double pi = 3.14159265358979323846;

    std::vector<double> hann(win);
    for (std::size_t i = 0; i < win; ++i) {
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) /
                                       static_cast<double>(win));
    }

    // Triangular filters on the HTK mel scale, unnormalized (peak 1).
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(static_cast<double>(sample_rate) / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                          static_cast<double>(n_mels + 1));
    }
    std::vector<double> filters(static_cast<std::size_t>(n_mels) * n_bins, 0.0);
    for (int ch = 0; ch < n_mels; ++ch) {
        const double f0 = edges[ch], f1 = edges[ch + 1], f2 = edges[ch + 2];
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double fk = static_cast<double>(k) * static_cast<double>(sample_rate) /
                              static_cast<double>(win);
            double w = 0.0;
            if (fk > f0 && fk < f1) {
                w = (fk - f0) / (f1 - f0);
            } else if (fk >= f1 && fk < f2) {
                w = (f2 - fk) / (f2 - f1);
            }
            filters[static_cast<std::size_t>(ch) * n_bins + k] = w;
        }
    }

    std::vector<double> out(n_frames * static_cast<std::size_t>(n_mels));
    std::vector<double> windowed(win);
    std::vector<double> mag(n_bins);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const double* frame = &waveform[t * hop];
        for (std::size_t i = 0; i < win; ++i) windowed[i] = frame[i] * hann[i];
        // Direct DFT; window lengths at desk scale keep this cheap enough.
        for (std::size_t k = 0; k < n_bins; ++k) {
            double re = 0.0, im = 0.0;
            const double base = -2.0 * pi * static_cast<double>(k) / static_cast<double>(win);
            for (std::size_t i = 0; i < win; ++i) {
                const double ang = base * static_cast<double>(i);
                re += windowed[i] * std::cos(ang);
                im += windowed[i] * std::sin(ang);
            }
            mag[k] = std::sqrt(re * re + im * im);
        }
        for (int ch = 0; ch < n_mels; ++ch) {
            const double* filt = &filters[static_cast<std::size_t>(ch) * n_bins];
            double acc = 0.0;
            for (std::size_t k = 0; k < n_bins; ++k) acc += filt[k] * mag[k];
            out[t * static_cast<std::size_t>(n_mels) + static_cast<std::size_t>(ch)] =
                std::log(std::max(acc, kLogFloor));
        }
    }
    AcousticFeatures f;
    f.frames = Tensor::from({n_frames, static_cast<std::size_t>(n_mels)}, std::move(out));
    f.frame_rate_hz = 1000.0 / hop_ms;
    return f;
}

}  // namespace mmpunc
