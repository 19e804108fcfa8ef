// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "mmpunc/checkpoint.hpp"
#include "mmpunc/error.hpp"
#include "mmpunc/trainer.hpp"

using namespace mmpunc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmpunc_train_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ModelConfig small_config(double dropout = 0.0) {
    ModelConfig cfg;
    cfg.vocab_size = 12;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.fusion_layers = 1;
    cfg.ve_len = 3;
    cfg.feat_dim = 4;
    cfg.dropout = dropout;
    return cfg;
}

// Four fixed samples, the first two with feature files on disk.
std::vector<Sample> mixed_corpus(const TempDir& dir) {
    std::vector<Sample> samples;
    Rng rng(555);
    for (int i = 0; i < 4; ++i) {
        Sample s;
        const std::size_t len = 3 + static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < len; ++j) {
            s.tokens.words.push_back("w" + std::to_string(j));
            s.tokens.ids.push_back(static_cast<int>(2 + (i + j) % 10));
            s.labels.push_back(static_cast<Label>((i + j) % 4));
        }
        if (i < 2) {
            AcousticFeatures f;
            f.frames = Tensor::randn({100, 4}, rng, 1.0);
            f.frame_rate_hz = 100.0;
            const std::string path =
                (dir.path / ("s" + std::to_string(i) + ".upft")).string();
            write_features(path, f);
            s.feature_path = path;
            s.has_audio = true;
            s.features = std::make_shared<AcousticFeatures>(load_features(path));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<double> snapshot(const ParamStore& store) {
    std::vector<double> all;
    for (const auto& [name, t] : store.all()) {
        all.insert(all.end(), t.values().begin(), t.values().end());
    }
    return all;
}

}  // namespace

TEST_CASE("noam crossover: both branches meet at the warmup step") {
    const double at_warmup = noam_lr(8000, 64, 8000, 1.0);
    const double expected = std::pow(64.0, -0.5) * std::pow(8000.0, -0.5);
    CHECK(at_warmup == doctest::Approx(expected).epsilon(1e-15));

    const double rising = 8000.0 * std::pow(8000.0, -1.5);
    const double falling = std::pow(8000.0, -0.5);
    CHECK(std::abs(rising - falling) <= 1e-15 * std::abs(falling));
}

TEST_CASE("noam first step matches the direct arithmetic oracle") {
    const double oracle = 1.0 * std::pow(64.0, -0.5) * (1.0 * std::pow(8000.0, -1.5));
    CHECK(noam_lr(1, 64, 8000, 1.0) == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(oracle == doctest::Approx(1.747e-7).epsilon(1e-3));
}

TEST_CASE("noam rises to the warmup step and decays after it") {
    double prev = 0.0;
    for (long s = 1; s <= 8000; s += 97) {
        const double lr = noam_lr(s, 64, 8000, 1.0);
        CHECK(lr > prev);
        prev = lr;
    }
    prev = noam_lr(8000, 64, 8000, 1.0);
    for (long s = 8001; s < 40000; s += 997) {
        const double lr = noam_lr(s, 64, 8000, 1.0);
        CHECK(lr < prev);
        prev = lr;
    }
    CHECK_THROWS_AS(noam_lr(0, 64, 8000, 1.0), ValueError);
}

TEST_CASE("noam scale pins the peak to the requested lr") {
    const double scale = noam_scale_for_peak(3e-3, 64, 200);
    CHECK(noam_lr(200, 64, 200, scale) == doctest::Approx(3e-3).epsilon(1e-12));
    CHECK(noam_lr(100, 64, 200, scale) < 3e-3);
    CHECK(noam_lr(400, 64, 200, scale) < 3e-3);
}

TEST_CASE("adam first step moves against the gradient sign at learning-rate size") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::zeros({2}));
    w.grad()[0] = 3.7;
    w.grad()[1] = -0.2;
    AdamState st = make_adam_state(store);
    adam_step(store, st, 0.01, 0.9, 0.999, 1e-8);
    CHECK(w.values()[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(w.values()[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(st.t == 1);
}

TEST_CASE("adam leaves parameters alone on a zero gradient but advances t") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from({2}, {1.5, -2.5}));
    AdamState st = make_adam_state(store);
    adam_step(store, st, 0.1, 0.9, 0.999, 1e-8);
    CHECK(w.values() == std::vector<double>{1.5, -2.5});
    CHECK(st.t == 1);
}

TEST_CASE("adam aborts on a NaN gradient, naming the parameter") {
    ParamStore store;
    Tensor w = store.add("enc.broken", Tensor::zeros({1}));
    w.grad()[0] = std::nan("");
    AdamState st = make_adam_state(store);
    try {
        adam_step(store, st, 0.1, 0.9, 0.999, 1e-8);
        FAIL("expected ValueError");
    } catch (const ValueError& e) {
        CHECK(std::string(e.what()).find("enc.broken") != std::string::npos);
    }
}

TEST_CASE("adam walks down a quadratic bowl") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from({1}, {1.0}));
    AdamState st = make_adam_state(store);
    std::vector<double> losses;
    for (int step = 0; step < 100; ++step) {
        const double x = w.values()[0];
        losses.push_back(x * x);
        w.grad()[0] = 2.0 * x;
        adam_step(store, st, 0.1, 0.9, 0.999, 1e-8);
    }
    // Monotone envelope: the running maximum over trailing 20-step windows
    // decreases, and the optimum is reached to high accuracy.
    for (int block = 1; block < 5; ++block) {
        double prev_max = 0.0, cur_max = 0.0;
        for (int i = 0; i < 20; ++i) {
            prev_max = std::max(prev_max, losses[static_cast<std::size_t>((block - 1) * 20 + i)]);
            cur_max = std::max(cur_max, losses[static_cast<std::size_t>(block * 20 + i)]);
        }
        CHECK(cur_max < prev_max);
    }
    for (int i = 1; i <= 8; ++i) CHECK(losses[i] < losses[i - 1]);
    CHECK(losses.back() < 1e-3);
}

TEST_CASE("ten smoke steps on a mixed corpus keep the loss finite") {
    TempDir dir;
    Model model(small_config(0.1), 7);
    AdamState opt = make_adam_state(model.params());
    TrainConfig cfg;
    cfg.max_steps = 10;
    cfg.batch_size = 2;
    cfg.eval_interval = 5;
    cfg.seed = 3;
    auto samples = mixed_corpus(dir);
    TrainResult res = train(model, opt, samples, samples, cfg);
    CHECK(res.step_losses.size() == 10);
    for (double l : res.step_losses) CHECK(std::isfinite(l));
    CHECK(res.metrics.size() == 2);
}

TEST_CASE("loss strictly decreases on a fixed batch at the default lr scale") {
    TempDir dir;
    Model model(small_config(0.0), 11);
    AdamState opt = make_adam_state(model.params());
    TrainConfig cfg;
    cfg.max_steps = 20;
    cfg.batch_size = 4;  // one batch holds the whole corpus
    cfg.eval_interval = 100;
    auto samples = mixed_corpus(dir);
    TrainResult res = train(model, opt, samples, {}, cfg);
    REQUIRE(res.step_losses.size() == 20);
    for (std::size_t i = 1; i < res.step_losses.size(); ++i) {
        CHECK(res.step_losses[i] < res.step_losses[i - 1]);
    }
}

TEST_CASE("identical seeds give identical loss traces") {
    TempDir dir;
    auto samples = mixed_corpus(dir);
    auto run = [&]() {
        Model model(small_config(0.1), 13);
        AdamState opt = make_adam_state(model.params());
        TrainConfig cfg;
        cfg.max_steps = 10;
        cfg.batch_size = 2;
        cfg.eval_interval = 100;
        cfg.seed = 77;
        return train(model, opt, samples, {}, cfg).step_losses;
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(a[i])));
    }
}

TEST_CASE("checkpoints round-trip bitwise and resume seamlessly") {
    TempDir dir;
    auto samples = mixed_corpus(dir);
    const std::string ckpt = (dir.path / "mid.upck").string();

    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.eval_interval = 1000;
    cfg.seed = 21;

    // Interrupted run: 10 steps, checkpoint, 10 more.
    Model interrupted(small_config(0.1), 99);
    AdamState opt1 = make_adam_state(interrupted.params());
    cfg.max_steps = 10;
    train(interrupted, opt1, samples, {}, cfg);
    save_checkpoint(ckpt, interrupted, opt1, 10, cfg.seed);

    Checkpoint cp = read_checkpoint(ckpt);
    CHECK(cp.step == 10);
    CHECK(cp.seed == cfg.seed);
    AdamState opt2;
    Model resumed = load_model(cp, opt2);
    CHECK(snapshot(resumed.params()) == snapshot(interrupted.params()));
    CHECK(opt2.t == opt1.t);
    for (const auto& [name, slot] : opt1.slots) {
        CHECK(opt2.slots.at(name).m == slot.m);
        CHECK(opt2.slots.at(name).v == slot.v);
    }

    TrainConfig resume_cfg = cfg;
    resume_cfg.start_step = 10;
    resume_cfg.max_steps = 20;
    TrainResult tail = train(resumed, opt2, samples, {}, resume_cfg);

    // Uninterrupted run: 20 straight steps, same seed.
    Model straight(small_config(0.1), 99);
    AdamState opt3 = make_adam_state(straight.params());
    TrainConfig whole_cfg = cfg;
    whole_cfg.max_steps = 20;
    TrainResult full = train(straight, opt3, samples, {}, whole_cfg);

    CHECK(snapshot(resumed.params()) == snapshot(straight.params()));
    CHECK(tail.step_losses.back() == full.step_losses.back());
}

TEST_CASE("loading a checkpoint into mismatched dims names the parameter") {
    TempDir dir;
    Model model(small_config(0.1), 1);
    AdamState opt = make_adam_state(model.params());
    const std::string ckpt = (dir.path / "m.upck").string();
    save_checkpoint(ckpt, model, opt, 0, 1);

    Checkpoint cp = read_checkpoint(ckpt);
    ModelConfig wrong = small_config(0.1);
    wrong.d_model = 32;
    Model other(wrong, 2);
    AdamState opt2 = make_adam_state(other.params());
    try {
        apply_checkpoint(other, opt2, cp);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("parameter '") != std::string::npos);
        CHECK(msg.find("checkpoint shape") != std::string::npos);
    }
}

TEST_CASE("corrupted checkpoint files are rejected with distinct errors") {
    TempDir dir;
    Model model(small_config(0.1), 1);
    AdamState opt = make_adam_state(model.params());
    const std::string good = (dir.path / "good.upck").string();
    save_checkpoint(good, model, opt, 5, 9);

    CHECK_THROWS_AS(read_checkpoint((dir.path / "nope.upck").string()), IoError);

    const std::string bad_magic = (dir.path / "bad.upck").string();
    std::ofstream(bad_magic, std::ios::binary) << "????" << std::string(16, '\0');
    CHECK_THROWS_AS(read_checkpoint(bad_magic), FormatError);

    const std::string truncated = (dir.path / "trunc.upck").string();
    fs::copy_file(good, truncated);
    fs::resize_file(truncated, fs::file_size(good) / 2);
    try {
        read_checkpoint(truncated);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("virtual embedding moves during training iff a batch had an audio-free sample") {
    TempDir dir;
    auto samples = mixed_corpus(dir);
    std::vector<Sample> all_audio(samples.begin(), samples.begin() + 2);

    TrainConfig cfg;
    cfg.max_steps = 5;
    cfg.batch_size = 2;
    cfg.eval_interval = 100;

    Model frozen(small_config(0.0), 31);
    const std::vector<double> before = frozen.virtual_embedding().values();
    AdamState opt = make_adam_state(frozen.params());
    train(frozen, opt, all_audio, {}, cfg);
    CHECK(frozen.virtual_embedding().values() == before);

    Model moving(small_config(0.0), 31);
    const std::vector<double> before2 = moving.virtual_embedding().values();
    AdamState opt2 = make_adam_state(moving.params());
    train(moving, opt2, samples, {}, cfg);
    CHECK(moving.virtual_embedding().values() != before2);
}

TEST_CASE("a poisoned parameter aborts training with the step in the message") {
    TempDir dir;
    auto samples = mixed_corpus(dir);
    Model model(small_config(0.0), 41);
    model.params().get("cls.w").values()[0] = 1e308;
    AdamState opt = make_adam_state(model.params());
    TrainConfig cfg;
    cfg.max_steps = 3;
    cfg.batch_size = 4;
    try {
        train(model, opt, samples, {}, cfg);
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("aborted at step") != std::string::npos);
    }
}

TEST_CASE("metric log entries are valid JSON with the expected fields") {
    TempDir dir;
    auto samples = mixed_corpus(dir);
    Model model(small_config(0.1), 51);
    AdamState opt = make_adam_state(model.params());
    TrainConfig cfg;
    cfg.max_steps = 4;
    cfg.batch_size = 2;
    cfg.eval_interval = 2;
    TrainIo io;
    io.metrics_path = (dir.path / "metrics.jsonl").string();
    TrainResult res = train(model, opt, samples, samples, cfg, io);
    CHECK(res.metrics.size() == 2);

    std::ifstream in(io.metrics_path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("step"));
        CHECK(j.contains("loss"));
        CHECK(j.contains("lr"));
        CHECK(j.contains("comma"));
        CHECK(j.contains("overall"));
        CHECK(j["comma"].contains("f1"));
    }
    CHECK(lines == 2);

    const std::string table = eval_report_table(res.metrics.back().eval, true);
    CHECK(table.find("OVERALL") != std::string::npos);
    CHECK(table.find("macro-F1") != std::string::npos);
}
