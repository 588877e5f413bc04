// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fd_check.hpp"
#include "itrack/checkpoint.hpp"
#include "itrack/errors.hpp"
#include "itrack/eval.hpp"
#include "itrack/rng.hpp"
#include "itrack/synth.hpp"
#include "itrack/ttd.hpp"

using namespace itrack;

namespace {

ModelConfig small_config(std::size_t vocab_size) {
  ModelConfig cfg;
  cfg.num_embeddings = vocab_size;
  cfg.embedding_dim = 6;
  cfg.emb_plus_out = 8;
  cfg.hidden_size = 7;
  return cfg;
}

struct Fixture {
  Corpus corpus;
  TrackerEnsemble ensemble;
  std::vector<TTDHead> heads;
};

Fixture make_fixture(std::uint64_t seed = 5, std::size_t n_dialogs = 10) {
  SynthOptions opts;
  opts.seed = 44;
  opts.n_dialogs = n_dialogs;
  opts.noise = 0.1;
  auto corpus = gen_synthetic_corpus(opts);
  auto vocab = Vocabulary::build(corpus);
  auto specs = build_component_specs(corpus);
  auto ensemble =
      TrackerEnsemble::create(small_config(vocab.size()), specs, vocab, seed);
  std::vector<TTDHead> heads;
  for (const auto& name : ensemble.component_names()) {
    heads.push_back(TTDHead::create(name, ensemble.model(0).config.hidden_size, seed));
  }
  return {std::move(corpus), std::move(ensemble), std::move(heads)};
}

Vector random_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("take and wait probabilities form a binary distribution") {
  Rng rng(1);
  auto head = TTDHead::create("area", 7, 3);
  for (int trial = 0; trial < 50; ++trial) {
    auto h = random_vector(rng, 7);
    auto p = ttd_forward(head, h);
    CHECK(p.take + p.wait == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.take >= 0.0);
    CHECK(p.wait >= 0.0);
  }
}

TEST_CASE("a zero-weight head is indifferent") {
  auto head = TTDHead::create("area", 7, 3);
  for (auto* p : head.parameters()) p->value.fill(0.0);
  auto p = ttd_forward(head, Vector(7, 0.25));
  CHECK(p.take == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.wait == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("head gradients match finite differences") {
  Rng rng(7);
  auto head = TTDHead::create("area", 7, 11);
  auto h = random_vector(rng, 7);
  // Loss of the take class, as during training.
  auto loss = [&] {
    return nn::nll_loss(nn::log_softmax(head.affine.forward(h)), 0).loss;
  };
  head.zero_grads();
  auto nll = nn::nll_loss(nn::log_softmax(head.affine.forward(h)), 0);
  head.affine.backward_acc(h, nll.grad);
  auto err = itrack::test::max_grad_fd_error(head.parameters(), loss);
  CHECK(err < 1e-6);
}

TEST_CASE("head creation is seeded per component") {
  auto a = TTDHead::create("area", 7, 5);
  auto b = TTDHead::create("area", 7, 5);
  auto c = TTDHead::create("food", 7, 5);
  CHECK(a.affine.w.value == b.affine.w.value);
  CHECK(a.affine.w.value != c.affine.w.value);
}

TEST_CASE("the decision rule takes only when every component crosses the bar") {
  CHECK(decide({0.9, 0.86, 0.99, 0.9, 0.9, 0.9}, 0.85));
  CHECK_FALSE(decide({0.9, 0.84, 0.99, 0.9, 0.9, 0.9}, 0.85));
  CHECK(decide({0.0, 0.0}, 0.0));  // d = 0 always takes
  CHECK(decide({}, 0.99));         // vacuous

  // Exhaustive agreement with the min rule on random inputs.
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(1 + rng.uniform_index(6));
    double lo = 1.0;
    for (auto& x : p) {
      x = rng.uniform();
      lo = std::min(lo, x);
    }
    double d = rng.uniform();
    CHECK(decide(p, d) == (lo >= d));
  }
}

TEST_CASE("an unreachable threshold reproduces the full tracker exactly") {
  auto fx = make_fixture();
  for (const auto& dialog : fx.corpus.dialogs) {
    auto trace = run_incremental(fx.ensemble, fx.heads, dialog, 1.0 + 1e-9);
    auto tracked = track_dialog(fx.ensemble, dialog);
    REQUIRE(trace.turns.size() == dialog.turns.size());
    for (std::size_t t = 0; t < trace.turns.size(); ++t) {
      const auto& turn = trace.turns[t];
      auto n = dialog.turns[t].user_tokens.size();
      CHECK(turn.n_tokens == static_cast<int>(n));
      if (n > 0) {
        CHECK(turn.forced);
        CHECK(turn.take_index == static_cast<int>(n));
      }
      // Frozen hypotheses equal the full tracker's final step bit for bit.
      const auto& full = tracked.turns[t].final;
      REQUIRE(turn.scored.dists.size() == full.dists.size());
      for (std::size_t c = 0; c < full.dists.size(); ++c) {
        CHECK(turn.scored.dists[c].probs == full.dists[c].probs);
        CHECK(turn.scored.h[c] == full.h[c]);
      }
    }
  }
}

TEST_CASE("a zero threshold takes at the first token of every turn") {
  auto fx = make_fixture();
  auto trace = run_incremental(fx.ensemble, fx.heads, fx.corpus.dialogs[0], 0.0);
  for (const auto& turn : trace.turns) {
    if (turn.n_tokens >= 1) {
      CHECK(turn.take_index == 1);
      CHECK_FALSE(turn.forced);
    }
  }
}

TEST_CASE("post-decision tokens still feed the encoder") {
  // The trace records probabilities for every token even after the take
  // point, and later turns match the unreachable-threshold run exactly.
  auto fx = make_fixture();
  const auto& dialog = fx.corpus.dialogs[1];
  auto eager = run_incremental(fx.ensemble, fx.heads, dialog, 0.0);
  auto full = run_incremental(fx.ensemble, fx.heads, dialog, 2.0);
  REQUIRE(eager.turns.size() == full.turns.size());
  for (std::size_t t = 0; t < eager.turns.size(); ++t) {
    REQUIRE(eager.turns[t].p_take.size() == full.turns[t].p_take.size());
    for (std::size_t k = 0; k < eager.turns[t].p_take.size(); ++k) {
      CHECK(eager.turns[t].p_take[k] == full.turns[t].p_take[k]);
    }
  }
}

TEST_CASE("take index is non-increasing as the threshold drops") {
  auto fx = make_fixture();
  for (const auto& dialog : fx.corpus.dialogs) {
    auto trace = run_incremental(fx.ensemble, fx.heads, dialog, 2.0);
    for (const auto& turn : trace.turns) {
      if (turn.n_tokens < 1) continue;
      int prev = turn.n_tokens;
      for (double d : {0.9, 0.7, 0.5, 0.3, 0.1, 0.0}) {
        int idx = take_index_for(turn, d);
        CHECK(idx >= 1);
        CHECK(idx <= prev);
        prev = idx;
      }
      CHECK(take_index_for(turn, 0.0) == 1);
    }
  }
}

TEST_CASE("decider training fits an all-take dataset") {
  auto fx = make_fixture(6, 8);
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  for (auto& rec : ds.records) {
    for (auto& lbl : rec.labels) lbl = 0;
  }
  TTDTrainConfig cfg;
  cfg.epochs = 15;
  cfg.seed = 0;
  cfg.optimizer.learning_rate = 0.1;  // degenerate labels tolerate a hot rate
  auto result = train_ttd(ds, fx.ensemble, cfg);
  REQUIRE(result.heads.size() == fx.ensemble.size());
  for (const auto& rec : ds.records) {
    for (std::size_t c = 0; c < result.heads.size(); ++c) {
      CHECK(ttd_forward(result.heads[c], rec.h[c]).take > 0.9);
    }
  }
  auto acc = ttd_token_accuracy(result.heads, ds);
  for (double a : acc) CHECK(a == 1.0);
  // Loss decreased along the way.
  for (const auto& s : result.summaries) {
    CHECK(s.history.back().train_loss < s.history.front().train_loss);
    CHECK(s.optimizer_steps ==
          static_cast<std::int64_t>(cfg.epochs * fx.corpus.dialogs.size()));
  }
}

TEST_CASE("decider training is deterministic and honors the class-weight flag") {
  auto fx = make_fixture(9, 6);
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  TTDTrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 11;
  auto a = train_ttd(ds, fx.ensemble, cfg);
  auto b = train_ttd(ds, fx.ensemble, cfg);
  for (std::size_t c = 0; c < a.heads.size(); ++c) {
    CHECK(a.heads[c].affine.w.value == b.heads[c].affine.w.value);
    CHECK(a.heads[c].affine.b.value == b.heads[c].affine.b.value);
  }
  for (std::size_t c = 0; c < a.summaries.size(); ++c) {
    for (std::size_t e = 0; e < a.summaries[c].history.size(); ++e) {
      CHECK(a.summaries[c].history[e].train_loss ==
            b.summaries[c].history[e].train_loss);
    }
  }

  cfg.reweight_classes = true;
  auto c = train_ttd(ds, fx.ensemble, cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.heads.size(); ++i) {
    if (!(a.heads[i].affine.w.value == c.heads[i].affine.w.value)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("decider training rejects artifacts that do not belong together") {
  auto fx = make_fixture(10, 5);
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  TTDTrainConfig cfg;
  cfg.epochs = 1;

  // Fingerprint drifts when the ensemble weights change after relabeling.
  fx.ensemble.model(0).head.b.value.a[0] += 1.0;
  CHECK_THROWS_AS(train_ttd(ds, fx.ensemble, cfg), ConfigError);
  fx.ensemble.model(0).head.b.value.a[0] -= 1.0;

  // Datasets loaded from disk carry no hidden vectors.
  auto stripped = ds;
  for (auto& rec : stripped.records) rec.h.clear();
  CHECK_THROWS_WITH_AS(train_ttd(stripped, fx.ensemble, cfg),
                       doctest::Contains("hidden"), ConfigError);

  auto empty = ds;
  empty.records.clear();
  CHECK_THROWS_AS(train_ttd(empty, fx.ensemble, cfg), ValueError);

  auto reordered = ds;
  std::swap(reordered.components[0], reordered.components[1]);
  CHECK_THROWS_AS(train_ttd(reordered, fx.ensemble, cfg), ConfigError);

  cfg.epochs = 0;
  CHECK_THROWS_AS(train_ttd(ds, fx.ensemble, cfg), ValueError);
}

TEST_CASE("decider training surfaces divergence with context") {
  auto fx = make_fixture(12, 4);
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  TTDTrainConfig cfg;
  cfg.epochs = 2;
  cfg.optimizer.learning_rate = 1e308;
  CHECK_THROWS_WITH_AS(train_ttd(ds, fx.ensemble, cfg), doctest::Contains("epoch"),
                       DivergenceError);
}

TEST_CASE("decider heads round-trip through their checkpoint") {
  auto fx = make_fixture(14, 5);
  auto dir = std::filesystem::temp_directory_path() /
             ("itrack-ttd-" + std::to_string(std::rand()));
  std::filesystem::create_directories(dir);
  auto path = (dir / "decider.ckpt").string();

  auto efp = ensemble_fingerprint(fx.ensemble);
  save_ttd(fx.heads, efp, path);
  auto loaded = load_ttd(path);
  CHECK(loaded.ensemble_fingerprint == efp);
  REQUIRE(loaded.heads.size() == fx.heads.size());
  for (std::size_t c = 0; c < fx.heads.size(); ++c) {
    CHECK(loaded.heads[c].component == fx.heads[c].component);
    CHECK(loaded.heads[c].affine.w.value == fx.heads[c].affine.w.value);
    CHECK(loaded.heads[c].affine.b.value == fx.heads[c].affine.b.value);
  }

  CHECK_THROWS_WITH_AS(load_ttd((dir / "absent.ckpt").string()),
                       doctest::Contains("train"), ValueError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trace export writes one record per turn") {
  auto fx = make_fixture(15, 4);
  auto dir = std::filesystem::temp_directory_path() /
             ("itrack-trace-" + std::to_string(std::rand()));
  std::filesystem::create_directories(dir);
  auto path = (dir / "traces.jsonl").string();

  std::vector<DecisionTrace> traces;
  std::size_t turns = 0;
  for (const auto& dialog : fx.corpus.dialogs) {
    traces.push_back(run_incremental(fx.ensemble, fx.heads, dialog, 0.5));
    turns += dialog.turns.size();
  }
  save_traces(traces, fx.ensemble.component_names(), 0.5, path);

  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == turns + 1);  // header + one per turn
  std::filesystem::remove_all(dir);
}
