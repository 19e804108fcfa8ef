// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, eval, punctuate, stats.
// Exit codes: 0 success, 1 runtime/model error, 2 usage or input error.
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmpunc/checkpoint.hpp"
#include "mmpunc/data.hpp"
#include "mmpunc/error.hpp"
#include "mmpunc/model.hpp"
#include "mmpunc/trainer.hpp"
#include "mmpunc/vocab.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mmpunc;

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954U;  // model init stream tag

struct TrainFlags {
    std::string corpus, eval_corpus, out_dir;
    std::string features_root, vocab_path, config_path, checkpoint;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr, dropout;
    std::optional<long> warmup, max_steps, eval_interval, min_count;
    std::optional<std::size_t> batch_size, d_model, heads, layers, enc_layers, ve_len, feat_dim;
};

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        throw IoError(std::string(what) + " " + path + " does not exist");
    }
}

// Config file: a flat JSON object with TrainConfig/ModelConfig keys.
// Precedence is defaults < config file < explicit flags.
void apply_config_file(const std::string& path, TrainFlags& f) {
    require_file(path, "config file");
    std::ifstream in(path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": invalid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config file " + path + ": not an object");
    for (const auto& [key, value] : cfg.items()) {
        try {
            if (key == "lr") {
                if (!f.lr) f.lr = value.get<double>();
            } else if (key == "dropout") {
                if (!f.dropout) f.dropout = value.get<double>();
            } else if (key == "warmup") {
                if (!f.warmup) f.warmup = value.get<long>();
            } else if (key == "max_steps") {
                if (!f.max_steps) f.max_steps = value.get<long>();
            } else if (key == "eval_interval") {
                if (!f.eval_interval) f.eval_interval = value.get<long>();
            } else if (key == "min_count") {
                if (!f.min_count) f.min_count = value.get<long>();
            } else if (key == "batch_size") {
                if (!f.batch_size) f.batch_size = value.get<std::size_t>();
            } else if (key == "d_model") {
                if (!f.d_model) f.d_model = value.get<std::size_t>();
            } else if (key == "heads") {
                if (!f.heads) f.heads = value.get<std::size_t>();
            } else if (key == "layers") {
                if (!f.layers) f.layers = value.get<std::size_t>();
            } else if (key == "enc_layers") {
                if (!f.enc_layers) f.enc_layers = value.get<std::size_t>();
            } else if (key == "ve_len") {
                if (!f.ve_len) f.ve_len = value.get<std::size_t>();
            } else if (key == "feat_dim") {
                if (!f.feat_dim) f.feat_dim = value.get<std::size_t>();
            } else if (key == "seed") {
                if (!f.seed) f.seed = value.get<std::uint64_t>();
            } else {
                throw ConfigError("config file " + path + ": unknown key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw ConfigError("config file " + path + ": bad value for '" + key +
                              "': " + e.what());
        }
    }
}

std::string ascii_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

int cmd_train(TrainFlags f) {
    if (!f.config_path.empty()) apply_config_file(f.config_path, f);
    require_file(f.corpus, "corpus file");
    require_file(f.eval_corpus, "eval corpus file");
    if (!f.vocab_path.empty()) require_file(f.vocab_path, "vocabulary file");
    if (!f.checkpoint.empty()) require_file(f.checkpoint, "checkpoint file");
    fs::create_directories(f.out_dir);

    TrainConfig tc;
    tc.base_lr = f.lr.value_or(tc.base_lr);
    tc.warmup_steps = f.warmup.value_or(tc.warmup_steps);
    tc.dropout = f.dropout.value_or(tc.dropout);
    tc.batch_size = f.batch_size.value_or(tc.batch_size);
    tc.max_steps = f.max_steps.value_or(tc.max_steps);
    tc.eval_interval = f.eval_interval.value_or(tc.eval_interval);
    tc.seed = f.seed.value_or(tc.seed);

    // First pass with a bare vocabulary collects the word inventory; ids are
    // remapped once the real vocabulary exists.
    Vocabulary stub;
    std::vector<Sample> train_set = load_corpus(f.corpus, stub, f.features_root);
    if (train_set.empty()) throw FormatError("corpus file " + f.corpus + " has no samples");

    Vocabulary vocab;
    if (!f.vocab_path.empty()) {
        vocab = Vocabulary::load(f.vocab_path);
    } else {
        std::vector<std::vector<std::string>> words;
        words.reserve(train_set.size());
        for (const Sample& s : train_set) words.push_back(s.tokens.words);
        vocab = build_vocabulary(words, static_cast<int>(f.min_count.value_or(1)));
        vocab.save((fs::path(f.out_dir) / "vocab.txt").string());
    }
    for (Sample& s : train_set) {
        for (std::size_t i = 0; i < s.tokens.words.size(); ++i) {
            s.tokens.ids[i] = vocab.id_of(s.tokens.words[i]);
        }
    }
    std::vector<Sample> eval_set = load_corpus(f.eval_corpus, vocab, f.features_root);
    if (eval_set.empty()) throw FormatError("eval corpus " + f.eval_corpus + " has no samples");

    Model* model = nullptr;
    AdamState opt;
    std::optional<Model> fresh;
    std::optional<Model> resumed;
    if (!f.checkpoint.empty()) {
        Checkpoint cp = read_checkpoint(f.checkpoint);
        if (cp.config.vocab_size != vocab.size()) {
            throw ConfigError("checkpoint vocabulary size " +
                              std::to_string(cp.config.vocab_size) +
                              " does not match vocabulary of " + std::to_string(vocab.size()));
        }
        resumed.emplace(load_model(cp, opt));
        model = &*resumed;
        tc.start_step = cp.step;
        if (!f.seed) tc.seed = cp.seed;
        if (tc.start_step >= tc.max_steps) {
            throw ConfigError("checkpoint is already at step " + std::to_string(cp.step) +
                              "; raise --max-steps to continue");
        }
    } else {
        ModelConfig mc;
        mc.vocab_size = vocab.size();
        mc.d_model = f.d_model.value_or(mc.d_model);
        mc.heads = f.heads.value_or(mc.heads);
        mc.fusion_layers = f.layers.value_or(mc.fusion_layers);
        mc.encoder_layers = f.enc_layers.value_or(mc.encoder_layers);
        mc.ve_len = f.ve_len.value_or(mc.ve_len);
        mc.feat_dim = f.feat_dim.value_or(mc.feat_dim);
        mc.dropout = tc.dropout;
        fresh.emplace(mc, mix64(tc.seed, kInitStream));
        model = &*fresh;
        opt = make_adam_state(model->params());
    }

    TrainIo io;
    io.metrics_path = (fs::path(f.out_dir) / "metrics.jsonl").string();
    io.best_ckpt_path = (fs::path(f.out_dir) / "best.upck").string();
    io.final_ckpt_path = (fs::path(f.out_dir) / "final.upck").string();

    TrainResult res = train(*model, opt, train_set, eval_set, tc, io);
    std::cout << "trained " << res.final_step << " steps; best overall F1 "
              << res.best_overall_f1 << "\n";
    std::cout << "outputs in " << f.out_dir << "\n";
    return 0;
}

struct EvalFlags {
    std::string corpus, checkpoint, vocab_path, features_root;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;  // accepted for interface uniformity; eval is deterministic
    bool as_json = false;
    bool with_macro = false;
};

int cmd_eval(const EvalFlags& f) {
    require_file(f.corpus, "corpus file");
    require_file(f.checkpoint, "checkpoint file");
    require_file(f.vocab_path, "vocabulary file");

    Checkpoint cp = read_checkpoint(f.checkpoint);
    Vocabulary vocab = Vocabulary::load(f.vocab_path);
    if (cp.config.vocab_size != vocab.size()) {
        throw ConfigError("checkpoint vocabulary size " + std::to_string(cp.config.vocab_size) +
                          " does not match vocabulary of " + std::to_string(vocab.size()));
    }
    AdamState opt;
    Model model = load_model(cp, opt);
    std::vector<Sample> samples = load_corpus(f.corpus, vocab, f.features_root);
    if (samples.empty()) throw FormatError("corpus file " + f.corpus + " has no samples");

    EvalReport rep = evaluate(model, samples, f.batch_size);
    if (f.as_json) {
        std::cout << eval_report_json(rep) << "\n";
    } else {
        std::cout << eval_report_table(rep, f.with_macro);
    }
    return 0;
}

struct PunctuateFlags {
    std::string checkpoint, vocab_path, features_root;
    std::string input = "-";
    std::string output = "-";
    std::uint64_t seed = 1;
};

int cmd_punctuate(const PunctuateFlags& f) {
    require_file(f.checkpoint, "checkpoint file");
    require_file(f.vocab_path, "vocabulary file");

    Checkpoint cp = read_checkpoint(f.checkpoint);
    Vocabulary vocab = Vocabulary::load(f.vocab_path);
    if (cp.config.vocab_size != vocab.size()) {
        throw ConfigError("checkpoint vocabulary size " + std::to_string(cp.config.vocab_size) +
                          " does not match vocabulary of " + std::to_string(vocab.size()));
    }
    AdamState opt;
    Model model = load_model(cp, opt);

    std::ifstream file_in;
    if (f.input != "-") {
        require_file(f.input, "input file");
        file_in.open(f.input);
        if (!file_in) throw IoError("cannot open input file " + f.input);
    }
    std::istream& in = f.input == "-" ? std::cin : file_in;

    std::ofstream file_out;
    if (f.output != "-") {
        file_out.open(f.output, std::ios::trunc);
        if (!file_out) throw IoError("cannot write output file " + f.output);
    }
    std::ostream& out = f.output == "-" ? std::cout : file_out;

    const fs::path root = f.features_root.empty() ? fs::path(".") : fs::path(f.features_root);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = line;
        std::string sidecar;
        if (auto tab = line.find('\t'); tab != std::string::npos) {
            text = line.substr(0, tab);
            sidecar = line.substr(tab + 1);
        }
        std::vector<std::string> words;
        {
            std::istringstream ws(text);
            std::string w;
            while (ws >> w) words.push_back(w);
        }
        if (words.empty()) {
            std::cerr << "warning: skipping empty input line " << line_no << "\n";
            continue;
        }

        Batch batch;
        batch.size = 1;
        batch.max_len = words.size();
        std::vector<int> ids;
        ids.reserve(words.size());
        for (const std::string& w : words) ids.push_back(vocab.id_of(ascii_lower(w)));
        batch.ids.push_back(std::move(ids));
        batch.labels.emplace_back(words.size(), Label::None);
        batch.mask.emplace_back(words.size(), 1);
        if (!sidecar.empty()) {
            auto feats = std::make_shared<AcousticFeatures>(
                load_features((root / sidecar).string()));
            batch.features.push_back(std::move(feats));
            batch.has_audio.push_back(1);
        } else {
            batch.features.push_back(nullptr);
            batch.has_audio.push_back(0);
        }

        const std::vector<Label> labels = model.predict(batch)[0];
        std::string rendered;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) rendered += ' ';
            rendered += words[i];
            rendered += label_mark(labels[i]);
        }
        out << rendered << "\n";
    }
    return 0;
}

struct StatsFlags {
    std::string corpus, features_root;
    std::uint64_t seed = 1;
    bool as_json = false;
};

int cmd_stats(const StatsFlags& f) {
    require_file(f.corpus, "corpus file");
    Vocabulary stub;
    std::vector<Sample> samples = load_corpus(f.corpus, stub, f.features_root);
    CorpusStats st = corpus_stats(samples);
    if (f.as_json) {
        json j{{"sentences", st.sentences},
               {"with_audio", st.with_audio},
               {"avg_sentence_len", st.avg_sentence_len}};
        if (st.avg_audio_seconds) {
            j["avg_audio_seconds"] = *st.avg_audio_seconds;
        } else {
            j["avg_audio_seconds"] = nullptr;
        }
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "sentences            " << st.sentences << "\n";
        std::cout << "with audio           " << st.with_audio << "\n";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", st.avg_sentence_len);
        std::cout << "avg sentence length  " << buf << "\n";
        if (st.avg_audio_seconds) {
            std::snprintf(buf, sizeof(buf), "%.2f", *st.avg_audio_seconds);
            std::cout << "avg audio length (s) " << buf << "\n";
        } else {
            std::cout << "avg audio length (s) n/a\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal punctuation restoration"};
    app.require_subcommand(1);

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "train a model on a JSONL corpus");
    train_cmd->add_option("--corpus", tf.corpus, "training corpus (JSON lines)")->required();
    train_cmd->add_option("--eval", tf.eval_corpus, "evaluation corpus (JSON lines)")
        ->required();
    train_cmd->add_option("--out", tf.out_dir, "output directory")->required();
    train_cmd->add_option("--features-root", tf.features_root,
                          "directory feature paths resolve against");
    train_cmd->add_option("--vocab", tf.vocab_path, "existing vocabulary file to reuse");
    train_cmd->add_option("--checkpoint", tf.checkpoint, "checkpoint to resume from");
    train_cmd->add_option("--config", tf.config_path, "JSON config file");
    train_cmd->add_option("--seed", tf.seed, "random seed");
    train_cmd->add_option("--lr", tf.lr, "peak learning rate");
    train_cmd->add_option("--warmup", tf.warmup, "warmup steps");
    train_cmd->add_option("--dropout", tf.dropout, "dropout rate");
    train_cmd->add_option("--batch-size", tf.batch_size, "batch size");
    train_cmd->add_option("--max-steps", tf.max_steps, "optimizer steps to run");
    train_cmd->add_option("--eval-interval", tf.eval_interval, "steps between evaluations");
    train_cmd->add_option("--d-model", tf.d_model, "model dimension");
    train_cmd->add_option("--heads", tf.heads, "attention heads");
    train_cmd->add_option("--layers", tf.layers, "fusion layer count");
    train_cmd->add_option("--enc-layers", tf.enc_layers, "encoder layer count");
    train_cmd->add_option("--ve-len", tf.ve_len, "virtual embedding length");
    train_cmd->add_option("--feat-dim", tf.feat_dim, "acoustic feature dimension");
    train_cmd->add_option("--min-count", tf.min_count, "vocabulary frequency threshold");

    EvalFlags ef;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    eval_cmd->add_option("--corpus", ef.corpus, "corpus to evaluate (JSON lines)")->required();
    eval_cmd->add_option("--checkpoint", ef.checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--vocab", ef.vocab_path, "vocabulary file")->required();
    eval_cmd->add_option("--features-root", ef.features_root,
                         "directory feature paths resolve against");
    eval_cmd->add_option("--batch-size", ef.batch_size, "evaluation batch size");
    eval_cmd->add_option("--seed", ef.seed, "random seed");
    eval_cmd->add_flag("--json", ef.as_json, "emit the report as JSON");
    eval_cmd->add_flag("--macro", ef.with_macro, "also print the macro-averaged F1");

    PunctuateFlags pf;
    auto* punct_cmd =
        app.add_subcommand("punctuate", "restore punctuation on plain text lines");
    punct_cmd->add_option("--checkpoint", pf.checkpoint, "model checkpoint")->required();
    punct_cmd->add_option("--vocab", pf.vocab_path, "vocabulary file")->required();
    punct_cmd->add_option("--input", pf.input,
                          "input file of unpunctuated lines; '-' for stdin. A line may carry "
                          "a tab-separated feature-file path");
    punct_cmd->add_option("--output", pf.output, "output file; '-' for stdout");
    punct_cmd->add_option("--features-root", pf.features_root,
                          "directory feature paths resolve against");
    punct_cmd->add_option("--seed", pf.seed, "random seed");

    StatsFlags sf;
    auto* stats_cmd = app.add_subcommand("stats", "corpus statistics");
    stats_cmd->add_option("--corpus", sf.corpus, "corpus file (JSON lines)")->required();
    stats_cmd->add_option("--features-root", sf.features_root,
                          "directory feature paths resolve against");
    stats_cmd->add_option("--seed", sf.seed, "random seed");
    stats_cmd->add_flag("--json", sf.as_json, "emit statistics as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(tf);
        if (eval_cmd->parsed()) return cmd_eval(ef);
        if (punct_cmd->parsed()) return cmd_punctuate(pf);
        if (stats_cmd->parsed()) return cmd_stats(sf);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
