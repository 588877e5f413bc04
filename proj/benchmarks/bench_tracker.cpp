// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the tracker hot paths: per-token encoding, whole-dialog
// tracking, whole-dialog backprop, the optimizer update, and the streaming
// decider. Model widths are the reference defaults so the numbers reflect
// production cost, not test-scale toys.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "itrack/components.hpp"
#include "itrack/model.hpp"
#include "itrack/nn.hpp"
#include "itrack/synth.hpp"
#include "itrack/training.hpp"
#include "itrack/ttd.hpp"
#include "itrack/vocab.hpp"

namespace {

using namespace itrack;

// Shared corpus/model setup, built once; benchmarks measure steady-state cost.
struct Bench {
  Corpus corpus;
  Vocabulary vocab;
  std::vector<ComponentSpec> specs;
  ModelConfig config;
  TrackerEnsemble ensemble;
  std::vector<TTDHead> heads;

  Bench() {
    SynthOptions opts;
    opts.seed = 17;
    opts.n_dialogs = 20;
    opts.noise = 0.1;
    corpus = gen_synthetic_corpus(opts);
    vocab = Vocabulary::build(corpus);
    specs = build_component_specs(corpus);
    config.num_embeddings = vocab.size();
    ensemble = TrackerEnsemble::create(config, specs, vocab, 17);
    for (const auto& name : ensemble.component_names()) {
      heads.push_back(TTDHead::create(name, config.hidden_size, 17));
    }
  }

  static const Bench& get() {
    static Bench instance;
    return instance;
  }
};

void bm_encode_step(benchmark::State& state) {
  const auto& b = Bench::get();
  const auto& model = b.ensemble.model(0);
  auto enc = init_state(model);
  int token_id = 1;
  for (auto _ : state) {
    enc = encode_step(model, enc, token_id, 0.9);
    benchmark::DoNotOptimize(enc.h);
  }
}
BENCHMARK(bm_encode_step);

void bm_classify(benchmark::State& state) {
  const auto& b = Bench::get();
  const auto& model = b.ensemble.model(0);
  auto enc = encode_step(model, init_state(model), 1, 0.9);
  for (auto _ : state) {
    auto dist = classify(model, enc.h);
    benchmark::DoNotOptimize(dist.probs);
  }
}
BENCHMARK(bm_classify);

void bm_track_dialog(benchmark::State& state) {
  const auto& b = Bench::get();
  const auto& dialog = b.corpus.dialogs.front();
  for (auto _ : state) {
    auto tracked = track_dialog(b.ensemble, dialog);
    benchmark::DoNotOptimize(tracked.turns);
  }
}
BENCHMARK(bm_track_dialog);

void bm_dialog_loss_backward(benchmark::State& state) {
  const auto& b = Bench::get();
  auto model = b.ensemble.model(0);  // mutable copy; grads accumulate here
  const auto& dialog = b.corpus.dialogs.front();
  for (auto _ : state) {
    model.zero_grads();
    double loss = dialog_loss_backward(model, dialog);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(bm_dialog_loss_backward);

void bm_amsgrad_step(benchmark::State& state) {
  const auto& b = Bench::get();
  auto model = b.ensemble.model(0);
  const auto& dialog = b.corpus.dialogs.front();
  model.zero_grads();
  dialog_loss_backward(model, dialog);
  nn::OptimizerConfig opt;
  for (auto _ : state) {
    // amsgrad_step zeroes the gradient, so later iterations update with a
    // zero gradient; the arithmetic cost per entry is identical.
    for (auto* p : model.parameters()) nn::amsgrad_step(*p, opt);
  }
}
BENCHMARK(bm_amsgrad_step);

void bm_run_incremental(benchmark::State& state) {
  const auto& b = Bench::get();
  const auto& dialog = b.corpus.dialogs.front();
  for (auto _ : state) {
    auto trace = run_incremental(b.ensemble, b.heads, dialog, 0.85);
    benchmark::DoNotOptimize(trace.turns);
  }
}
BENCHMARK(bm_run_incremental);

}  // namespace

BENCHMARK_MAIN();
