// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "mmpunc/error.hpp"
#include "mmpunc/features.hpp"
#include "mmpunc/rng.hpp"

using namespace mmpunc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmpunc_feat_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("feature files declare their shape and round-trip bitwise") {
    TempDir dir;
    const std::string path = (dir.path / "a.upft").string();

    Rng rng(5);
    AcousticFeatures f;
    f.frames = Tensor::zeros({10, 8});
    for (double& v : f.frames.values()) v = round_f32(rng.normal(0.0, 1.0));
    f.frame_rate_hz = 100.0;
    write_features(path, f);

    AcousticFeatures loaded = load_features(path);
    CHECK(loaded.frames.shape() == std::vector<std::size_t>{10, 8});
    CHECK(loaded.frame_rate_hz == 100.0);
    CHECK(loaded.frames.values() == f.frames.values());
}

TEST_CASE("feature file byte layout is pinned") {
    TempDir dir;
    const std::string path = (dir.path / "pinned.upft").string();
    // 2x1 matrix {1.0, -2.0} at 50 Hz, written by hand.
    const unsigned char bytes[] = {
        'U', 'P',  'F',  'T',                  // magic
        1,   0,    0,    0,                    // version
        2,   0,    0,    0,                    // rows
        1,   0,    0,    0,                    // cols
        0,   0,    0x48, 0x42,                 // 50.0f
        0,   0,    0x80, 0x3f,                 // 1.0f
        0,   0,    0,    0xc0,                 // -2.0f
    };
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes), sizeof(bytes));

    AcousticFeatures f = load_features(path);
    CHECK(f.frame_rate_hz == 50.0);
    CHECK(f.frames.values() == std::vector<double>{1.0, -2.0});
    CHECK(f.seconds() == doctest::Approx(0.04));
}

TEST_CASE("feature loader distinguishes its failure modes") {
    TempDir dir;
    CHECK_THROWS_AS(load_features((dir.path / "missing.upft").string()), IoError);

    const std::string bad_magic = (dir.path / "bad_magic.upft").string();
    std::ofstream(bad_magic, std::ios::binary) << "NOPE" << std::string(16, '\0');
    try {
        load_features(bad_magic);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }

    // Valid header declaring 10x8, payload truncated.
    const std::string truncated = (dir.path / "short.upft").string();
    {
        AcousticFeatures f;
        f.frames = Tensor::full({10, 8}, 0.5);
        f.frame_rate_hz = 100.0;
        write_features(truncated, f);
        fs::resize_file(truncated, 100);
    }
    try {
        load_features(truncated);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("payload") != std::string::npos);
    }

    const std::string bad_version = (dir.path / "bad_version.upft").string();
    {
        std::string buf = "UPFT";
        buf.push_back(9);
        buf.append(15, '\0');
        std::ofstream(bad_version, std::ios::binary) << buf;
    }
    try {
        load_features(bad_version);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("logmel of silence sits exactly on the energy floor") {
    std::vector<double> silence(16000, 0.0);
    AcousticFeatures f = logmel(silence, 16000, 8, 25.0, 10.0);
    const double floor_db = std::log(1e-10);
    for (double v : f.frames.values()) CHECK(v == floor_db);
}

TEST_CASE("logmel frame count follows the framing formula") {
    std::vector<double> wave(16000, 0.1);
    AcousticFeatures f = logmel(wave, 16000, 26, 25.0, 10.0);
    CHECK(f.frame_count() == 98);
    CHECK(f.dim() == 26);
    CHECK(f.frame_rate_hz == doctest::Approx(100.0));

    CHECK_THROWS_AS(logmel(std::vector<double>(100, 0.0), 16000, 8, 25.0, 10.0), ValueError);
}

TEST_CASE("a 440 Hz tone concentrates energy in the mel band covering 440 Hz") {
    const int sr = 16000, n_mels = 26;
    std::vector<double> wave(sr);
    for (int i = 0; i < sr; ++i) {
        wave[i] = std::sin(2.0 * 3.14159265358979323846 * 440.0 * i / sr);
    }
    AcousticFeatures f = logmel(wave, sr, n_mels, 25.0, 10.0);

    // Independent arithmetic: the channel whose center frequency is nearest
    // 440 Hz under the same HTK spacing.
    const double mel_hi = hz_to_mel(sr / 2.0);
    int expected = 0;
    double best = 1e18;
    for (int ch = 0; ch < n_mels; ++ch) {
        const double center = mel_to_hz(mel_hi * (ch + 1) / (n_mels + 1));
        if (std::abs(center - 440.0) < best) {
            best = std::abs(center - 440.0);
            expected = ch;
        }
    }

    std::vector<double> mean_energy(n_mels, 0.0);
    for (std::size_t t = 0; t < f.frame_count(); ++t) {
        for (int ch = 0; ch < n_mels; ++ch) mean_energy[ch] += f.frames.at(t, ch);
    }
    int peak = 0;
    for (int ch = 1; ch < n_mels; ++ch) {
        if (mean_energy[ch] > mean_energy[peak]) peak = ch;
    }
    CHECK(std::abs(peak - expected) <= 1);
    for (int ch = 0; ch < n_mels; ++ch) {
        if (std::abs(ch - peak) >= 3) {
            CHECK(mean_energy[peak] > mean_energy[ch] + 5.0 * f.frame_count());
        }
    }
}
