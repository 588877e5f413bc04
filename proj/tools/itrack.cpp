// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end wiring the tracking library into a pipeline:
//   gen-corpus -> stats -> train -> relabel -> train-ttd -> eval/curve/hist
// plus an interactive token-by-token repl. Settings come from an optional
// JSON config file; flags override the file; every random choice derives
// from --seed. Identical config and seed produce byte-identical artifacts.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "itrack/checkpoint.hpp"
#include "itrack/corpus.hpp"
#include "itrack/errors.hpp"
#include "itrack/eval.hpp"
#include "itrack/relabel.hpp"
#include "itrack/rng.hpp"
#include "itrack/synth.hpp"
#include "itrack/training.hpp"
#include "itrack/ttd.hpp"
#include "itrack/vocab.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using itrack::ConfigError;
using itrack::ValueError;
using ordered_json = nlohmann::ordered_json;

namespace {

struct RunPaths {
  std::string train_corpus;
  std::string dev_corpus;
  std::string test_corpus;
  std::string checkpoints;  // defaults to <out>/checkpoints
  std::string out = "out";
};

// Every setting a subcommand may need, merged from defaults, the config
// file, and flags (in that order; flags win).
struct RunConfig {
  RunPaths paths;
  itrack::CorpusMode mode = itrack::CorpusMode::kAsr;
  itrack::ModelConfig model;  // num_embeddings is replaced by the vocabulary size
  itrack::TrainConfig train;
  itrack::TTDTrainConfig ttd;
  double r = 1.0;   // fixed-ratio decider
  double d = 0.85;  // learned-decider confidence threshold
  std::uint64_t seed = 0;

  std::string checkpoint_dir() const {
    return paths.checkpoints.empty() ? paths.out + "/checkpoints" : paths.checkpoints;
  }
};

[[noreturn]] void bad_config(const std::string& path, const std::string& detail) {
  throw ValueError("config file '" + path + "': " + detail);
}

void apply_number(const ordered_json& v, const std::string& path, const std::string& key,
                  double* out) {
  if (!v.is_number()) bad_config(path, "key '" + key + "' must be a number");
  *out = v.get<double>();
}

void apply_int(const ordered_json& v, const std::string& path, const std::string& key,
               int* out) {
  if (!v.is_number_integer()) bad_config(path, "key '" + key + "' must be an integer");
  *out = v.get<int>();
}

void apply_size(const ordered_json& v, const std::string& path, const std::string& key,
                std::size_t* out) {
  if (!v.is_number_unsigned()) bad_config(path, "key '" + key + "' must be a non-negative integer");
  *out = v.get<std::size_t>();
}

void apply_string(const ordered_json& v, const std::string& path, const std::string& key,
                  std::string* out) {
  if (!v.is_string()) bad_config(path, "key '" + key + "' must be a string");
  *out = v.get<std::string>();
}

// JSON config file. Unknown keys are rejected so typos fail loudly instead
// of silently running with defaults.
RunConfig run_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("config file '" + path + "' cannot be opened");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    bad_config(path, e.what());
  }
  if (!doc.is_object()) bad_config(path, "top level must be an object");

  RunConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    if (key == "train_corpus") {
      apply_string(v, path, key, &cfg.paths.train_corpus);
    } else if (key == "dev_corpus") {
      apply_string(v, path, key, &cfg.paths.dev_corpus);
    } else if (key == "test_corpus") {
      apply_string(v, path, key, &cfg.paths.test_corpus);
    } else if (key == "checkpoints") {
      apply_string(v, path, key, &cfg.paths.checkpoints);
    } else if (key == "out") {
      apply_string(v, path, key, &cfg.paths.out);
    } else if (key == "mode") {
      std::string s;
      apply_string(v, path, key, &s);
      cfg.mode = itrack::corpus_mode_from_string(s);
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) bad_config(path, "key 'seed' must be a non-negative integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "ratio") {
      apply_number(v, path, key, &cfg.r);
    } else if (key == "threshold") {
      apply_number(v, path, key, &cfg.d);
    } else if (key == "model") {
      if (!v.is_object()) bad_config(path, "key 'model' must be an object");
      for (const auto& [mk, mv] : v.items()) {
        if (mk == "embedding_dim") {
          apply_size(mv, path, "model." + mk, &cfg.model.embedding_dim);
        } else if (mk == "emb_plus_out") {
          apply_size(mv, path, "model." + mk, &cfg.model.emb_plus_out);
        } else if (mk == "hidden_size") {
          apply_size(mv, path, "model." + mk, &cfg.model.hidden_size);
        } else {
          bad_config(path, "unknown key 'model." + mk + "'");
        }
      }
    } else if (key == "train") {
      if (!v.is_object()) bad_config(path, "key 'train' must be an object");
      for (const auto& [tk, tv] : v.items()) {
        if (tk == "epochs") {
          apply_int(tv, path, "train." + tk, &cfg.train.epochs);
        } else if (tk == "patience") {
          apply_int(tv, path, "train." + tk, &cfg.train.patience);
        } else if (tk == "learning_rate") {
          apply_number(tv, path, "train." + tk, &cfg.train.optimizer.learning_rate);
        } else {
          bad_config(path, "unknown key 'train." + tk + "'");
        }
      }
    } else if (key == "ttd") {
      if (!v.is_object()) bad_config(path, "key 'ttd' must be an object");
      for (const auto& [tk, tv] : v.items()) {
        if (tk == "epochs") {
          apply_int(tv, path, "ttd." + tk, &cfg.ttd.epochs);
        } else if (tk == "reweight_classes") {
          if (!tv.is_boolean()) bad_config(path, "key 'ttd.reweight_classes' must be a boolean");
          cfg.ttd.reweight_classes = tv.get<bool>();
        } else if (tk == "learning_rate") {
          apply_number(tv, path, "ttd." + tk, &cfg.ttd.optimizer.learning_rate);
        } else {
          bad_config(path, "unknown key 'ttd." + tk + "'");
        }
      }
    } else {
      bad_config(path, "unknown key '" + key + "'");
    }
  }
  return cfg;
}

// Flag values shared across subcommands. Only the parsed subcommand's
// options count; resolve() consults sub->count() so file values survive
// unless the flag was actually given.
struct Flags {
  std::string config;
  std::string mode = "asr";
  std::string out = "out";
  std::string checkpoints;
  std::string train_corpus, dev_corpus, test_corpus;
  std::string corpus;         // explicit corpus for stats/relabel/eval/curve/hist
  std::string against;        // stats: train corpus for the OOV rate
  std::string split = "test";  // eval/curve/hist corpus selector
  std::string grid;           // curve: comma-separated ratios
  std::string splits;         // gen-corpus: "train,dev,test" dialog counts
  std::uint64_t seed = 0;
  double ratio = 1.0;
  double threshold = 0.85;
  double noise = 0.1;
  double learning_rate = 0.001;
  double confidence = 1.0;
  int epochs = 0;
  int patience = 0;
  int dialogs = 100;
  std::size_t embedding_dim = 0, emb_plus_out = 0, hidden_size = 0;
  bool reweight = false;
  bool match_ratio = false;
};

bool given(const CLI::App* sub, const std::string& flag) {
  const auto* opt = sub->get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

RunConfig resolve(const Flags& f, const CLI::App* sub) {
  RunConfig cfg;
  if (given(sub, "--config")) cfg = run_config_from_file(f.config);

  if (given(sub, "--seed")) cfg.seed = f.seed;
  if (given(sub, "--mode")) cfg.mode = itrack::corpus_mode_from_string(f.mode);
  if (given(sub, "--out")) cfg.paths.out = f.out;
  if (given(sub, "--checkpoints")) cfg.paths.checkpoints = f.checkpoints;
  if (given(sub, "--train-corpus")) cfg.paths.train_corpus = f.train_corpus;
  if (given(sub, "--dev-corpus")) cfg.paths.dev_corpus = f.dev_corpus;
  if (given(sub, "--test-corpus")) cfg.paths.test_corpus = f.test_corpus;
  if (given(sub, "--ratio")) cfg.r = f.ratio;
  if (given(sub, "--threshold")) cfg.d = f.threshold;
  if (given(sub, "--epochs")) {
    cfg.train.epochs = f.epochs;
    cfg.ttd.epochs = f.epochs;
  }
  if (given(sub, "--patience")) cfg.train.patience = f.patience;
  if (given(sub, "--learning-rate")) {
    cfg.train.optimizer.learning_rate = f.learning_rate;
    cfg.ttd.optimizer.learning_rate = f.learning_rate;
  }
  if (given(sub, "--embedding-dim")) cfg.model.embedding_dim = f.embedding_dim;
  if (given(sub, "--affine-dim")) cfg.model.emb_plus_out = f.emb_plus_out;
  if (given(sub, "--hidden")) cfg.model.hidden_size = f.hidden_size;
  if (given(sub, "--reweight-classes")) cfg.ttd.reweight_classes = f.reweight;

  if (!(cfg.r > 0.0 && cfg.r <= 1.0)) throw ValueError("ratio must be in (0, 1]");
  if (!(cfg.d >= 0.0 && cfg.d <= 1.0)) throw ValueError("threshold must be in [0, 1]");

  // One seed drives corpus synthesis, parameter init, and shuffles.
  cfg.train.seed = cfg.seed;
  cfg.ttd.seed = cfg.seed;
  return cfg;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

itrack::Corpus load_required(const RunConfig& cfg, const std::string& path,
                             const char* which, const char* flag) {
  if (path.empty()) {
    throw ConfigError(std::string("no ") + which + " corpus configured; pass " + flag +
                      " or set it in the config file");
  }
  if (!fs::exists(path)) {
    throw ConfigError(std::string(which) + " corpus not found at '" + path + "'");
  }
  return itrack::load_corpus(path, cfg.mode);
}

// eval/curve/hist read one corpus: --corpus wins, otherwise --split picks
// among the configured paths.
itrack::Corpus pick_corpus(const RunConfig& cfg, const Flags& f, const CLI::App* sub,
                           std::string* split_name) {
  if (given(sub, "--corpus")) {
    *split_name = f.corpus;
    if (!fs::exists(f.corpus)) throw ConfigError("corpus not found at '" + f.corpus + "'");
    return itrack::load_corpus(f.corpus, cfg.mode);
  }
  *split_name = f.split;
  if (f.split == "train") return load_required(cfg, cfg.paths.train_corpus, "train", "--train-corpus");
  if (f.split == "dev") return load_required(cfg, cfg.paths.dev_corpus, "dev", "--dev-corpus");
  if (f.split == "test") return load_required(cfg, cfg.paths.test_corpus, "test", "--test-corpus");
  throw ValueError("unknown split '" + f.split + "' (expected train, dev, or test)");
}

itrack::TrackerEnsemble load_ensemble_or_hint(const RunConfig& cfg) {
  auto dir = cfg.checkpoint_dir();
  if (!fs::exists(dir + "/manifest.json")) {
    throw ConfigError("no tracker checkpoint at '" + dir + "'; run `itrack train` first");
  }
  return itrack::load_ensemble(dir);
}

std::vector<itrack::TTDHead> load_heads_or_hint(const RunConfig& cfg,
                                                const itrack::TrackerEnsemble& ensemble) {
  auto path = cfg.checkpoint_dir() + "/ttd.ckpt";
  if (!fs::exists(path)) {
    throw ConfigError("no decider checkpoint at '" + path + "'; run `itrack train-ttd` first");
  }
  auto ck = itrack::load_ttd(path);
  if (ck.ensemble_fingerprint != itrack::ensemble_fingerprint(ensemble)) {
    throw ConfigError("decider at '" + path +
                      "' was trained against a different tracker; re-run `itrack train-ttd`");
  }
  return std::move(ck.heads);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot write '" + path + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    auto piece = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      grid.push_back(std::stod(piece));
    } catch (const std::exception&) {
      throw ValueError("bad grid value '" + piece + "' (expected comma-separated numbers)");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen_corpus(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  ensure_dir(cfg.paths.out);
  auto emit = [&](const std::string& name, std::uint64_t seed, int n) {
    itrack::SynthOptions opts;
    opts.seed = seed;
    opts.n_dialogs = n;
    opts.noise = f.noise;
    auto corpus = itrack::gen_synthetic_corpus(opts);
    auto path = cfg.paths.out + "/" + name + ".jsonl";
    itrack::save_corpus(corpus, path);
    auto stats = itrack::corpus_stats(corpus);
    std::printf("wrote %s (%zu dialogs, %zu turns)\n", path.c_str(), stats.num_dialogs,
                stats.num_turns);
  };

  if (given(sub, "--splits")) {
    auto counts = parse_grid(f.splits);
    if (counts.size() != 3) {
      throw ValueError("--splits expects three comma-separated dialog counts, e.g. 500,100,100");
    }
    // Disjoint seed streams per split, all derived from the one seed.
    const char* names[3] = {"train", "dev", "test"};
    for (int i = 0; i < 3; ++i) {
      emit(names[i], itrack::mix_seed(cfg.seed, itrack::fnv1a64(names[i])),
           static_cast<int>(counts[i]));
    }
  } else {
    emit("corpus", cfg.seed, f.dialogs);
  }
  return 0;
}

int cmd_stats(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  if (!fs::exists(f.corpus)) throw ConfigError("corpus not found at '" + f.corpus + "'");
  auto corpus = itrack::load_corpus(f.corpus, cfg.mode);
  auto stats = itrack::corpus_stats(corpus);

  ordered_json doc;
  doc["corpus"] = f.corpus;
  doc["mode"] = itrack::to_string(cfg.mode);
  doc["stats"] = ordered_json::parse(stats.to_json());
  if (given(sub, "--against")) {
    if (!fs::exists(f.against)) throw ConfigError("corpus not found at '" + f.against + "'");
    auto train = itrack::load_corpus(f.against, cfg.mode);
    auto vocab = itrack::Vocabulary::build(train);
    doc["train_vocab_size"] = vocab.size();
    doc["oov_rate"] = itrack::oov_rate(vocab, corpus);
  }

  auto text = doc.dump(2);
  std::printf("%s\n", text.c_str());
  ensure_dir(cfg.paths.out);
  write_text(cfg.paths.out + "/stats.json", text);
  return 0;
}

int cmd_train(RunConfig cfg) {
  auto t0 = std::chrono::steady_clock::now();
  auto train = load_required(cfg, cfg.paths.train_corpus, "train", "--train-corpus");
  auto dev = load_required(cfg, cfg.paths.dev_corpus, "dev", "--dev-corpus");

  auto vocab = itrack::Vocabulary::build(train);
  auto specs = itrack::build_component_specs(train);
  cfg.model.num_embeddings = vocab.size();

  std::printf("training %zu components on %zu dialogs (vocab %zu, dev %zu dialogs)\n",
              specs.size(), train.dialogs.size(), vocab.size(), dev.dialogs.size());
  cfg.train.on_epoch = [](const std::string& component, const itrack::EpochStats& st) {
    std::printf("[train] %-10s epoch %2d  loss %.4f  dev_acc %.4f\n", component.c_str(),
                st.epoch, st.train_loss, st.dev_accuracy);
    std::fflush(stdout);
  };
  auto result = itrack::train_ensemble(train, dev, cfg.model, specs, vocab, cfg.train);

  auto ckdir = cfg.checkpoint_dir();
  ensure_dir(ckdir);
  auto fingerprint = itrack::save_ensemble(result.ensemble, ckdir);

  ordered_json doc;
  doc["format_version"] = 1;
  doc["kind"] = "train_summary";
  doc["seed"] = cfg.seed;
  doc["mode"] = itrack::to_string(cfg.mode);
  doc["model"] = {{"num_embeddings", cfg.model.num_embeddings},
                  {"embedding_dim", cfg.model.embedding_dim},
                  {"emb_plus_out", cfg.model.emb_plus_out},
                  {"hidden_size", cfg.model.hidden_size}};
  doc["optimizer"] = {{"learning_rate", cfg.train.optimizer.learning_rate}};
  doc["epochs"] = cfg.train.epochs;
  doc["patience"] = cfg.train.patience;
  doc["ensemble_fingerprint"] = fingerprint;
  doc["components"] = ordered_json::array();
  for (const auto& s : result.summaries) {
    ordered_json c;
    c["component"] = s.component;
    c["best_epoch"] = s.best_epoch;
    c["best_dev_accuracy"] = s.best_dev_accuracy;
    c["optimizer_steps"] = s.optimizer_steps;
    c["history"] = ordered_json::array();
    for (const auto& e : s.history) {
      c["history"].push_back({{"epoch", e.epoch},
                              {"train_loss", e.train_loss},
                              {"dev_accuracy", e.dev_accuracy}});
    }
    doc["components"].push_back(std::move(c));
  }
  ensure_dir(cfg.paths.out);
  write_text(cfg.paths.out + "/train_summary.json", doc.dump(2));

  for (const auto& s : result.summaries) {
    std::printf("[train] %-10s best epoch %2d  dev_acc %.4f\n", s.component.c_str(),
                s.best_epoch, s.best_dev_accuracy);
  }
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("checkpoints in %s (fingerprint %s), %.1fs\n", ckdir.c_str(),
              fingerprint.c_str(), secs);
  return 0;
}

int cmd_relabel(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  auto ensemble = load_ensemble_or_hint(cfg);
  itrack::Corpus corpus;
  if (given(sub, "--corpus")) {
    if (!fs::exists(f.corpus)) throw ConfigError("corpus not found at '" + f.corpus + "'");
    corpus = itrack::load_corpus(f.corpus, cfg.mode);
  } else {
    corpus = load_required(cfg, cfg.paths.train_corpus, "train", "--train-corpus");
  }

  auto dataset = itrack::relabel_corpus(ensemble, corpus);
  ensure_dir(cfg.paths.out);
  auto path = cfg.paths.out + "/relabeled.jsonl";
  itrack::save_relabeled(dataset, path);

  std::printf("wrote %s (%zu token records, tracker %s)\n", path.c_str(),
              dataset.records.size(), dataset.fingerprint.c_str());
  for (std::size_t c = 0; c < dataset.components.size(); ++c) {
    std::size_t positives = 0;
    for (const auto& rec : dataset.records) positives += rec.labels[c];
    std::printf("[relabel] %-10s %6zu/%zu tokens still changing (%.3f)\n",
                dataset.components[c].c_str(), positives, dataset.records.size(),
                static_cast<double>(positives) / static_cast<double>(dataset.records.size()));
  }
  return 0;
}

int cmd_train_ttd(RunConfig cfg) {
  auto ensemble = load_ensemble_or_hint(cfg);
  auto fingerprint = itrack::ensemble_fingerprint(ensemble);

  auto labels_path = cfg.paths.out + "/relabeled.jsonl";
  if (!fs::exists(labels_path)) {
    throw ConfigError("no relabeled dataset at '" + labels_path + "'; run `itrack relabel` first");
  }
  auto loaded = itrack::load_relabeled(labels_path);
  if (loaded.fingerprint != fingerprint) {
    throw ConfigError("relabeled dataset at '" + labels_path +
                      "' was produced by a different tracker; re-run `itrack relabel`");
  }

  // The exported dataset carries labels only; hidden vectors are recomputed
  // from the frozen tracker and must reproduce the exported labels exactly.
  auto train = load_required(cfg, cfg.paths.train_corpus, "train", "--train-corpus");
  auto dataset = itrack::relabel_corpus(ensemble, train);
  bool matches = dataset.records.size() == loaded.records.size();
  for (std::size_t i = 0; matches && i < dataset.records.size(); ++i) {
    matches = dataset.records[i].labels == loaded.records[i].labels &&
              dataset.records[i].dialog_id == loaded.records[i].dialog_id;
  }
  if (!matches) {
    throw ConfigError("relabeled dataset at '" + labels_path +
                      "' does not match the train corpus; re-run `itrack relabel`");
  }

  cfg.ttd.on_epoch = [](const std::string& component, const itrack::TTDEpochStats& st) {
    std::printf("[train-ttd] %-10s epoch %2d  loss %.4f  train_acc %.4f\n", component.c_str(),
                st.epoch, st.train_loss, st.train_accuracy);
    std::fflush(stdout);
  };
  auto result = itrack::train_ttd(dataset, ensemble, cfg.ttd);

  auto ckdir = cfg.checkpoint_dir();
  ensure_dir(ckdir);
  auto ttd_path = ckdir + "/ttd.ckpt";
  itrack::save_ttd(result.heads, fingerprint, ttd_path);

  ordered_json doc;
  doc["format_version"] = 1;
  doc["kind"] = "ttd_summary";
  doc["seed"] = cfg.seed;
  doc["ensemble_fingerprint"] = fingerprint;
  doc["epochs"] = cfg.ttd.epochs;
  doc["reweight_classes"] = cfg.ttd.reweight_classes;
  doc["optimizer"] = {{"learning_rate", cfg.ttd.optimizer.learning_rate}};
  doc["components"] = ordered_json::array();
  for (const auto& s : result.summaries) {
    ordered_json c;
    c["component"] = s.component;
    c["optimizer_steps"] = s.optimizer_steps;
    c["history"] = ordered_json::array();
    for (const auto& e : s.history) {
      c["history"].push_back({{"epoch", e.epoch},
                              {"train_loss", e.train_loss},
                              {"train_accuracy", e.train_accuracy}});
    }
    doc["components"].push_back(std::move(c));
  }

  // Held-out token accuracy against dev, when a dev corpus is configured.
  if (!cfg.paths.dev_corpus.empty()) {
    auto dev = load_required(cfg, cfg.paths.dev_corpus, "dev", "--dev-corpus");
    auto dev_dataset = itrack::relabel_corpus(ensemble, dev);
    auto accs = itrack::ttd_token_accuracy(result.heads, dev_dataset);
    ordered_json per = ordered_json::object();
    double min_acc = 1.0;
    for (std::size_t c = 0; c < accs.size(); ++c) {
      per[dataset.components[c]] = accs[c];
      min_acc = std::min(min_acc, accs[c]);
      std::printf("[train-ttd] %-10s held-out token accuracy %.4f\n",
                  dataset.components[c].c_str(), accs[c]);
    }
    std::printf("[train-ttd] min held-out token accuracy %.4f\n", min_acc);
    doc["holdout"] = {{"split", "dev"}, {"per_component", per}, {"min", min_acc}};
  }

  ensure_dir(cfg.paths.out);
  write_text(cfg.paths.out + "/ttd_summary.json", doc.dump(2));
  std::printf("wrote %s (tracker %s)\n", ttd_path.c_str(), fingerprint.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  auto ensemble = load_ensemble_or_hint(cfg);
  auto heads = load_heads_or_hint(cfg, ensemble);
  std::string split;
  auto corpus = pick_corpus(cfg, f, sub, &split);
  ensure_dir(cfg.paths.out);

  double d_used = cfg.d;
  if (f.match_ratio) {
    // Sweep the threshold so the learned decider's realized ratio matches
    // the fixed-ratio decider's, then compare at that operating point.
    auto det = itrack::evaluate_deterministic(ensemble, corpus, cfg.r, split);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    auto sweep = itrack::sweep_threshold(ensemble, heads, corpus, det.realized_ratio, grid);
    d_used = sweep.best_d;

    std::string csv = "d,realized\n";
    char row[64];
    double achieved = 0.0;
    for (const auto& p : sweep.points) {
      std::snprintf(row, sizeof(row), "%.2f,%.6f\n", p.d, p.realized);
      csv += row;
      if (p.d == d_used) achieved = p.realized;
    }
    write_text(cfg.paths.out + "/sweep.csv", csv);
    std::printf("matched threshold d=%.2f (realized %.4f, target %.4f)\n", d_used, achieved,
                det.realized_ratio);
  }

  auto report = itrack::compare_report(ensemble, heads, corpus, cfg.r, d_used, split);
  auto text = report.to_text();
  std::printf("%s", text.c_str());
  write_text(cfg.paths.out + "/report.txt", text);
  std::printf("wrote %s/report.txt\n", cfg.paths.out.c_str());
  return 0;
}

int cmd_curve(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  auto ensemble = load_ensemble_or_hint(cfg);
  std::string split;
  auto corpus = pick_corpus(cfg, f, sub, &split);

  std::vector<double> grid;
  if (given(sub, "--grid")) {
    grid = parse_grid(f.grid);
  } else {
    for (int i = 1; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
  }
  auto rows = itrack::prefix_accuracy_curve(ensemble, corpus, grid);

  std::printf("ratio  goal_acc  method_acc  requested_acc  (%s)\n", split.c_str());
  for (const auto& r : rows) {
    std::printf("%5.2f  %8.4f  %10.4f  %13.4f\n", r.ratio, r.goal_acc, r.method_acc,
                r.requested_acc);
  }
  ensure_dir(cfg.paths.out);
  itrack::save_curve_csv(rows, cfg.paths.out + "/curve.csv");
  std::printf("wrote %s/curve.csv\n", cfg.paths.out.c_str());
  return 0;
}

int cmd_hist(const RunConfig& cfg, const Flags& f, const CLI::App* sub) {
  auto ensemble = load_ensemble_or_hint(cfg);
  auto heads = load_heads_or_hint(cfg, ensemble);
  std::string split;
  auto corpus = pick_corpus(cfg, f, sub, &split);

  std::vector<itrack::DecisionTrace> traces;
  traces.reserve(corpus.dialogs.size());
  for (const auto& dialog : corpus.dialogs) {
    traces.push_back(itrack::run_incremental(ensemble, heads, dialog, cfg.d));
  }

  std::vector<int> takes, lengths;
  for (const auto& trace : traces) {
    for (const auto& turn : trace.turns) {
      if (turn.n_tokens == 0) continue;
      takes.push_back(turn.take_index);
      lengths.push_back(turn.n_tokens);
    }
  }
  std::printf("threshold d=%.2f on %s: %zu turns, realized ratio %.4f\n", cfg.d, split.c_str(),
              takes.size(), itrack::realized_ratio(takes, lengths));

  ensure_dir(cfg.paths.out);
  itrack::save_traces(traces, ensemble.component_names(), cfg.d, cfg.paths.out + "/traces.jsonl");
  auto cells = itrack::take_histogram(traces);
  itrack::save_histogram_csv(cells, cfg.paths.out + "/hist.csv");
  std::printf("wrote %s/hist.csv and %s/traces.jsonl\n", cfg.paths.out.c_str(),
              cfg.paths.out.c_str());
  return 0;
}

// Interactive token-by-token inspection: each typed token is encoded as a
// user token; the per-component top hypothesis and take probability print
// after every step, with a TAKE marker the first time the decider fires.
int cmd_repl(const RunConfig& cfg, const Flags& f) {
  auto ensemble = load_ensemble_or_hint(cfg);
  std::vector<itrack::TTDHead> heads;
  auto ttd_path = cfg.checkpoint_dir() + "/ttd.ckpt";
  if (fs::exists(ttd_path)) {
    auto ck = itrack::load_ttd(ttd_path);
    if (ck.ensemble_fingerprint != itrack::ensemble_fingerprint(ensemble)) {
      throw ConfigError("decider at '" + ttd_path +
                        "' was trained against a different tracker; re-run `itrack train-ttd`");
    }
    heads = std::move(ck.heads);
  }

  double confidence = f.confidence;
  std::vector<itrack::EncoderState> states;
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    states.push_back(itrack::init_state(ensemble.model(c)));
  }
  bool fired = false;
  int token_no = 0;

  auto reset_states = [&] {
    for (std::size_t c = 0; c < ensemble.size(); ++c) {
      states[c] = itrack::init_state(ensemble.model(c));
    }
    fired = false;
    token_no = 0;
  };

  std::printf("itrack repl — type user tokens; :sys <text>  :endturn  :reset  :conf <x>  :quit\n");
  std::printf("components:");
  for (const auto& name : ensemble.component_names()) std::printf(" %s", name.c_str());
  if (heads.empty()) {
    std::printf(" | decider: none loaded (run `itrack train-ttd` to enable p_take)\n");
  } else {
    std::printf(" | decider threshold d=%.2f\n", cfg.d);
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line == ":quit") break;
    if (line == ":reset") {
      reset_states();
      std::printf("(reset: new dialog)\n");
      continue;
    }
    if (line == ":endturn") {
      fired = false;
      token_no = 0;
      std::printf("(new turn)\n");
      continue;
    }
    if (line.rfind(":conf", 0) == 0) {
      try {
        confidence = std::stod(line.substr(5));
      } catch (const std::exception&) {
        std::printf("(usage: :conf <number in [0,1]>)\n");
        continue;
      }
      std::printf("(confidence = %.2f)\n", confidence);
      continue;
    }
    bool system = false;
    std::string text = line;
    if (line.rfind(":sys", 0) == 0) {
      system = true;
      text = line.substr(4);
    }

    auto tokens = itrack::tokenize(text);
    for (const auto& surface : tokens) {
      itrack::TokenObs obs;
      obs.surface = surface;
      obs.confidence = system ? 1.0 : confidence;
      obs.speaker = system ? itrack::Speaker::kSystem : itrack::Speaker::kUser;
      for (std::size_t c = 0; c < ensemble.size(); ++c) {
        const auto& model = ensemble.model(c);
        states[c] = itrack::encode_step(model, states[c], itrack::resolve_token_id(model, obs),
                                        obs.confidence);
      }
      if (system) continue;

      ++token_no;
      std::printf("[%2d] %-12s |", token_no, surface.c_str());
      std::vector<double> p_take;
      for (std::size_t c = 0; c < ensemble.size(); ++c) {
        const auto& model = ensemble.model(c);
        auto dist = itrack::classify(model, states[c].h);
        if (model.spec.kind == itrack::ComponentKind::kCategorical) {
          auto top = dist.argmax();
          std::printf(" %s=%s(%.2f)", model.spec.name.c_str(),
                      model.spec.values[top].c_str(), dist.probs[top]);
        } else {
          std::printf(" %s={", model.spec.name.c_str());
          bool first = true;
          for (auto s : dist.active_slots()) {
            std::printf("%s%s", first ? "" : ",", model.spec.values[s].c_str());
            first = false;
          }
          std::printf("}");
        }
        if (!heads.empty()) p_take.push_back(itrack::ttd_forward(heads[c], states[c].h).take);
      }
      if (!heads.empty()) {
        double min_take = 1.0;
        for (auto p : p_take) min_take = std::min(min_take, p);
        std::printf(" | p_take=%.2f", min_take);
        if (!fired && itrack::decide(p_take, cfg.d)) {
          fired = true;
          std::printf("  << TAKE");
        }
      }
      std::printf("\n");
    }
    if (system) std::printf("(system: %zu tokens)\n", tokens.size());
    std::fflush(stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-incremental dialog state tracking with a learned turn-taking decider"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file; flags override its values");
    sub->add_option("--seed", f.seed, "Seed for every random choice in this command");
    sub->add_option("--mode", f.mode, "Token stream: asr or transcript");
    sub->add_option("--out", f.out, "Output directory (default: out)");
    sub->add_option("--checkpoints", f.checkpoints, "Checkpoint directory (default: <out>/checkpoints)");
  };
  auto add_corpora = [&](CLI::App* sub) {
    sub->add_option("--train-corpus", f.train_corpus, "Training corpus (JSONL)");
    sub->add_option("--dev-corpus", f.dev_corpus, "Development corpus (JSONL)");
    sub->add_option("--test-corpus", f.test_corpus, "Test corpus (JSONL)");
  };
  auto add_split = [&](CLI::App* sub) {
    sub->add_option("--split", f.split, "Which configured corpus to read: train, dev, or test");
    sub->add_option("--corpus", f.corpus, "Explicit corpus path (overrides --split)");
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate a seeded synthetic dialog corpus");
  add_common(gen);
  gen->add_option("--dialogs", f.dialogs, "Number of dialogs (default 100)");
  gen->add_option("--noise", f.noise, "Confidence noise level in [0,1] (default 0.1)");
  gen->add_option("--splits", f.splits, "Write train/dev/test files with these dialog counts, e.g. 500,100,100");

  auto* stats = app.add_subcommand("stats", "Corpus statistics (and OOV rate against a training corpus)");
  add_common(stats);
  stats->add_option("--corpus", f.corpus, "Corpus to analyze")->required();
  stats->add_option("--against", f.against, "Training corpus whose vocabulary defines the OOV rate");

  auto* train = app.add_subcommand("train", "Train the per-component trackers");
  add_common(train);
  add_corpora(train);
  train->add_option("--epochs", f.epochs, "Max training epochs (default 30)");
  train->add_option("--patience", f.patience, "Early-stopping patience; 0 disables (default 5)");
  train->add_option("--learning-rate", f.learning_rate, "Optimizer step size (default 0.001)");
  train->add_option("--embedding-dim", f.embedding_dim, "Token embedding width (default 170)");
  train->add_option("--affine-dim", f.emb_plus_out, "Width of the pre-recurrent affine layer (default 300)");
  train->add_option("--hidden", f.hidden_size, "Recurrent hidden width (default 100)");

  auto* relabel = app.add_subcommand("relabel", "Derive token-level take/wait labels from a trained tracker");
  add_common(relabel);
  add_corpora(relabel);
  relabel->add_option("--corpus", f.corpus, "Corpus to relabel (default: the training corpus)");

  auto* train_ttd = app.add_subcommand("train-ttd", "Train the turn-taking decider on relabeled tokens");
  add_common(train_ttd);
  add_corpora(train_ttd);
  train_ttd->add_option("--epochs", f.epochs, "Training epochs (default 10)");
  train_ttd->add_option("--learning-rate", f.learning_rate, "Optimizer step size (default 0.001)");
  train_ttd->add_flag("--reweight-classes", f.reweight, "Weight take/wait losses by inverse class frequency");

  auto* eval = app.add_subcommand("eval", "Compare the fixed-ratio and learned deciders on one split");
  add_common(eval);
  add_corpora(eval);
  add_split(eval);
  eval->add_option("--ratio", f.ratio, "Fixed decider's utterance fraction r in (0,1] (default 1.0)");
  eval->add_option("--threshold", f.threshold, "Learned decider's confidence threshold d in [0,1] (default 0.85)");
  eval->add_flag("--match-ratio", f.match_ratio, "Sweep d so the realized ratios match before comparing");

  auto* curve = app.add_subcommand("curve", "Accuracy at each fixed prefix ratio (CSV)");
  add_common(curve);
  add_corpora(curve);
  add_split(curve);
  curve->add_option("--grid", f.grid, "Comma-separated ratios (default 0.1..1.0)");

  auto* hist = app.add_subcommand("hist", "Histogram of learned-decider take points (CSV)");
  add_common(hist);
  add_corpora(hist);
  add_split(hist);
  hist->add_option("--threshold", f.threshold, "Confidence threshold d in [0,1] (default 0.85)");

  auto* repl = app.add_subcommand("repl", "Interactive token-by-token tracker inspection");
  add_common(repl);
  repl->add_option("--threshold", f.threshold, "Confidence threshold d in [0,1] (default 0.85)");
  repl->add_option("--confidence", f.confidence, "Confidence applied to typed tokens (default 1.0)");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  try {
    RunConfig cfg = resolve(f, sub);
    if (sub == gen) return cmd_gen_corpus(cfg, f, sub);
    if (sub == stats) return cmd_stats(cfg, f, sub);
    if (sub == train) return cmd_train(std::move(cfg));
    if (sub == relabel) return cmd_relabel(cfg, f, sub);
    if (sub == train_ttd) return cmd_train_ttd(std::move(cfg));
    if (sub == eval) return cmd_eval(cfg, f, sub);
    if (sub == curve) return cmd_curve(cfg, f, sub);
    if (sub == hist) return cmd_hist(cfg, f, sub);
    if (sub == repl) return cmd_repl(cfg, f);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "itrack %s: %s\n", sub->get_name().c_str(), e.what());
    return 1;
  }
  return 0;
}
