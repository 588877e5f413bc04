// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "itrack/checkpoint.hpp"
#include "itrack/errors.hpp"
#include "itrack/relabel.hpp"
#include "itrack/rng.hpp"
#include "itrack/synth.hpp"

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
};

Fixture make_fixture(std::uint64_t seed = 4, std::size_t n_dialogs = 12) {
  SynthOptions opts;
  opts.seed = 31;
  opts.n_dialogs = n_dialogs;
  opts.noise = 0.15;
  auto corpus = gen_synthetic_corpus(opts);
  auto vocab = Vocabulary::build(corpus);
  auto specs = build_component_specs(corpus);
  auto ensemble =
      TrackerEnsemble::create(small_config(vocab.size()), specs, vocab, seed);
  return {std::move(corpus), std::move(ensemble)};
}

std::size_t count_user_tokens(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& d : corpus.dialogs) {
    for (const auto& t : d.turns) n += t.user_tokens.size();
  }
  return n;
}

}  // namespace

TEST_CASE("labeling rule compares each hypothesis to the final one") {
  using Keys = std::vector<std::vector<std::size_t>>;
  // (A, A, B, B, B) with final B.
  CHECK(labels_from_hypotheses(Keys{{1}, {1}, {2}, {2}, {2}}) ==
        std::vector<int>{1, 1, 0, 0, 0});
  // Constant hypotheses.
  CHECK(labels_from_hypotheses(Keys{{3}, {3}, {3}}) == std::vector<int>{0, 0, 0});
  // Non-monotone: equality with the end, not stability, is what counts.
  CHECK(labels_from_hypotheses(Keys{{2}, {1}, {2}}) == std::vector<int>{0, 1, 0});
  // Set-valued hypotheses compare whole sets.
  CHECK(labels_from_hypotheses(Keys{{0, 2}, {2}, {0, 2}}) == std::vector<int>{0, 1, 0});
  CHECK(labels_from_hypotheses(Keys{}) == std::vector<int>{});
  // Single token: trivially equal to itself.
  CHECK(labels_from_hypotheses(Keys{{5}}) == std::vector<int>{0});
}

TEST_CASE("labeling rule matches a brute-force oracle on random sequences") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.uniform_index(12);
    std::vector<std::vector<std::size_t>> keys(n);
    for (auto& k : keys) {
      std::size_t len = rng.uniform_index(3);  // 0..2 elements: sets too
      for (std::size_t i = 0; i < len; ++i) k.push_back(rng.uniform_index(4));
    }
    auto got = labels_from_hypotheses(keys);
    REQUIRE(got.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      int expected = keys[i] != keys[n - 1] ? 1 : 0;
      CHECK(got[i] == expected);
    }
    CHECK(got.back() == 0);
  }
}

TEST_CASE("relabel_turn labels one component and advances the state") {
  auto fx = make_fixture();
  const auto& model = fx.ensemble.model(3);
  const auto& dialog = fx.corpus.dialogs[0];

  auto state = init_state(model);
  auto track = track_dialog_component(model, dialog);
  for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
    auto r = relabel_turn(model, state, dialog.turns[t]);
    REQUIRE(r.labels.size() == dialog.turns[t].user_tokens.size());
    // Labels recompute from the tracked distributions.
    const auto& steps = track.turns[t].steps;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      int expected =
          hypothesis_key(steps[k].dist) != hypothesis_key(steps.back().dist) ? 1 : 0;
      CHECK(r.labels[k] == expected);
    }
    if (!r.labels.empty()) CHECK(r.labels.back() == 0);
    state = r.state;
  }
}

TEST_CASE("relabel_turn on a turn without user tokens yields no labels") {
  auto fx = make_fixture();
  const auto& model = fx.ensemble.model(0);
  Turn turn;
  TokenObs sys;
  sys.surface = "hello";
  sys.speaker = Speaker::kSystem;
  turn.system_tokens = {sys};
  auto r = relabel_turn(model, init_state(model), turn);
  CHECK(r.labels.empty());
  auto direct = encode_step(model, init_state(model), resolve_token_id(model, sys),
                            sys.confidence);
  CHECK(r.state.h == direct.h);
}

TEST_CASE("relabel_corpus emits one record per user token") {
  auto fx = make_fixture();
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  CHECK(ds.records.size() == count_user_tokens(fx.corpus));
  CHECK(ds.fingerprint == ensemble_fingerprint(fx.ensemble));
  CHECK(ds.components == fx.ensemble.component_names());

  // Record identity and ordering; hidden vectors attached per component.
  std::size_t i = 0;
  for (const auto& d : fx.corpus.dialogs) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      for (std::size_t k = 0; k < d.turns[t].user_tokens.size(); ++k, ++i) {
        const auto& rec = ds.records[i];
        CHECK(rec.dialog_id == d.id);
        CHECK(rec.turn == static_cast<int>(t));
        CHECK(rec.token_index == static_cast<int>(k));
        CHECK(rec.surface == d.turns[t].user_tokens[k].surface);
        REQUIRE(rec.labels.size() == ds.components.size());
        REQUIRE(rec.h.size() == ds.components.size());
        for (const auto& h : rec.h) {
          CHECK(h.size() == fx.ensemble.model(0).config.hidden_size);
        }
        // Final token of each turn: all labels zero.
        if (k + 1 == d.turns[t].user_tokens.size()) {
          for (int lbl : rec.labels) CHECK(lbl == 0);
        }
      }
    }
  }
}

TEST_CASE("relabel_corpus labels agree with per-component recomputation") {
  auto fx = make_fixture(8, 6);
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  for (std::size_t c = 0; c < fx.ensemble.size(); ++c) {
    const auto& model = fx.ensemble.model(c);
    std::size_t i = 0;
    for (const auto& dialog : fx.corpus.dialogs) {
      auto state = init_state(model);
      for (const auto& turn : dialog.turns) {
        auto r = relabel_turn(model, state, turn);
        for (std::size_t k = 0; k < r.labels.size(); ++k, ++i) {
          CHECK(ds.records[i].labels[c] == r.labels[k]);
        }
        state = r.state;
      }
    }
    CHECK(i == ds.records.size());
  }
}

TEST_CASE("relabeling is deterministic") {
  auto fx = make_fixture();
  auto a = relabel_corpus(fx.ensemble, fx.corpus);
  auto b = relabel_corpus(fx.ensemble, fx.corpus);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.fingerprint == b.fingerprint);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].labels == b.records[i].labels);
    CHECK(a.records[i].h == b.records[i].h);
  }
}

TEST_CASE("relabel_corpus rejects a corpus bound to a foreign vocabulary") {
  auto fx = make_fixture();
  auto corpus = fx.corpus;
  corpus.dialogs[0].turns[0].user_tokens[0].token_id =
      static_cast<std::int64_t>(fx.ensemble.model(0).config.num_embeddings) + 5;
  CHECK_THROWS_AS(relabel_corpus(fx.ensemble, corpus), ConfigError);
}

TEST_CASE("relabeled datasets round-trip through the line-JSON format") {
  auto dir = std::filesystem::temp_directory_path() /
             ("itrack-relabel-" + std::to_string(std::rand()));
  std::filesystem::create_directories(dir);
  auto path = (dir / "relabeled.jsonl").string();

  auto fx = make_fixture();
  auto ds = relabel_corpus(fx.ensemble, fx.corpus);
  save_relabeled(ds, path);
  auto loaded = load_relabeled(path);
  CHECK(loaded.fingerprint == ds.fingerprint);
  CHECK(loaded.components == ds.components);
  REQUIRE(loaded.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(loaded.records[i].dialog_id == ds.records[i].dialog_id);
    CHECK(loaded.records[i].turn == ds.records[i].turn);
    CHECK(loaded.records[i].token_index == ds.records[i].token_index);
    CHECK(loaded.records[i].surface == ds.records[i].surface);
    CHECK(loaded.records[i].labels == ds.records[i].labels);
    CHECK(loaded.records[i].h.empty());  // vectors are recomputed, not stored
  }

  // Byte-identical on re-save of the loaded labels.
  auto path2 = (dir / "again.jsonl").string();
  save_relabeled(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  std::filesystem::remove_all(dir);
}

TEST_CASE("loading rejects files that are not relabeled datasets") {
  auto dir = std::filesystem::temp_directory_path() /
             ("itrack-relabel-bad-" + std::to_string(std::rand()));
  std::filesystem::create_directories(dir);

  CHECK_THROWS_AS(load_relabeled((dir / "missing.jsonl").string()), ValueError);

  auto garbage = (dir / "garbage.jsonl").string();
  {
    std::ofstream out(garbage);
    out << "{\"kind\": \"something_else\"}\n";
  }
  CHECK_THROWS_AS(load_relabeled(garbage), ParseError);

  auto truncated = (dir / "broken.jsonl").string();
  {
    std::ofstream out(truncated);
    out << "{\"format_version\": 1, \"kind\": \"ttd_dataset\", \"fingerprint\": "
           "\"00\", \"components\": [\"area\"]}\n";
    out << "{\"dialog_id\": \"d\", \"turn\": 0}\n";
  }
  try {
    load_relabeled(truncated);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  std::filesystem::remove_all(dir);
}
