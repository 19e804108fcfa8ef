// SPDX-License-Identifier: Apache-2.0
//
// Acoustic feature frames plus the .upft feature-file format and a built-in
// log-mel extractor. Feature extraction sits outside the gradient boundary:
// frames enter the model as constants.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmpunc/tensor.hpp"

namespace mmpunc {

struct AcousticFeatures {
    Tensor frames;  // [m x c_feat], finite values
    double frame_rate_hz = 0.0;

    std::size_t frame_count() const { return frames.rows(); }
    std::size_t dim() const { return frames.cols(); }
    double seconds() const { return static_cast<double>(frame_count()) / frame_rate_hz; }
};

// .upft layout, all little-endian:
//   "UPFT" | u32 version=1 | u32 rows | u32 cols | f32 frame_rate_hz |
//   rows*cols f32 payload, row-major.
AcousticFeatures load_features(const std::string& path);
void write_features(const std::string& path, const AcousticFeatures& features);

// Log-mel filterbank: Hann-windowed framing, magnitude spectrum by direct
// DFT, HTK-scale triangular mel filters, log with a 1e-10 floor.
// Frame count = floor((len - win)/hop) + 1.
AcousticFeatures logmel(const std::vector<double>& waveform, int sample_rate, int n_mels,
                        double win_ms, double hop_ms);

}  // namespace mmpunc
