// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "itrack/errors.hpp"
#include "itrack/eval.hpp"
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
  std::vector<TTDHead> heads;
};

Fixture make_fixture(std::uint64_t seed = 2, std::size_t n_dialogs = 10) {
  SynthOptions opts;
  opts.seed = 52;
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

// Brute-force L2 over the explicit joint outcome space of independent
// categorical components, against the one-hot joint gold.
double brute_joint_categorical(const std::vector<std::vector<double>>& probs,
                               const std::vector<std::size_t>& golds) {
  std::vector<std::size_t> idx(probs.size(), 0);
  double sq = 0.0;
  while (true) {
    double p = 1.0;
    bool is_gold = true;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      p *= probs[i][idx[i]];
      if (idx[i] != golds[i]) is_gold = false;
    }
    double diff = p - (is_gold ? 1.0 : 0.0);
    sq += diff * diff;
    std::size_t i = 0;
    for (; i < idx.size(); ++i) {
      if (++idx[i] < probs[i].size()) break;
      idx[i] = 0;
    }
    if (i == idx.size()) break;
  }
  return std::sqrt(sq);
}

// Brute-force L2 over all subsets of independent Bernoulli slots.
double brute_joint_bernoulli(const std::vector<double>& probs,
                             const std::vector<int>& targets) {
  auto n = probs.size();
  double sq = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double p = 1.0;
    bool is_gold = true;
    for (std::size_t s = 0; s < n; ++s) {
      bool on = (mask >> s) & 1;
      p *= on ? probs[s] : 1.0 - probs[s];
      if (on != (targets[s] == 1)) is_gold = false;
    }
    double diff = p - (is_gold ? 1.0 : 0.0);
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& x : p) {
    x = rng.uniform() + 1e-4;
    sum += x;
  }
  for (auto& x : p) x /= sum;
  return p;
}

TurnHypothesis hyp(const GoalAnnotation& goal, const std::string& method,
                   std::vector<std::string> requested) {
  TurnHypothesis h;
  h.goal = goal;
  h.method = method;
  std::sort(requested.begin(), requested.end());
  h.requested = std::move(requested);
  return h;
}

TurnAnnotation gold_of(const GoalAnnotation& goal, const std::string& method,
                       std::vector<std::string> requested) {
  TurnAnnotation g;
  g.goal = goal;
  g.method = method;
  g.requested = std::move(requested);
  return g;
}

}  // namespace

TEST_CASE("fixed-ratio take points round to the nearest token") {
  CHECK(deterministic_take_index(2, 0.5) == 1);
  CHECK(deterministic_take_index(5, 0.6) == 3);
  CHECK(deterministic_take_index(4, 0.6) == 2);
  CHECK(deterministic_take_index(2, 0.75) == 2);  // half rounds away from zero
  CHECK(deterministic_take_index(3, 0.01) == 1);  // clamped to the first token
  for (int n : {1, 2, 3, 5, 8, 13}) {
    CHECK(deterministic_take_index(n, 1.0) == n);
  }
  CHECK_THROWS_AS(deterministic_take_index(0, 0.5), ValueError);
  CHECK_THROWS_AS(deterministic_take_index(3, 0.0), ValueError);
  CHECK_THROWS_AS(deterministic_take_index(3, 1.2), ValueError);
}

TEST_CASE("realized ratio averages the actual take fractions") {
  CHECK(realized_ratio({1, 3}, {2, 5}) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(realized_ratio({4, 7, 2}, {4, 7, 2}) == 1.0);
  CHECK_THROWS_AS(realized_ratio({}, {}), ValueError);
  CHECK_THROWS_AS(realized_ratio({1, 2}, {3}), ValueError);
  CHECK_THROWS_AS(realized_ratio({1}, {0}), ValueError);
}

TEST_CASE("accuracy scores the three macro-components") {
  GoalAnnotation g1;
  g1.pricerange = "cheap";
  g1.area = "north";
  GoalAnnotation g2 = g1;
  g2.food = "thai";

  std::vector<TurnHypothesis> hyps = {
      hyp(g1, "byconstraints", {"phone", "addr"}),
      hyp(g2, "byname", {}),
  };
  std::vector<TurnAnnotation> golds = {
      gold_of(g1, "byconstraints", {"addr", "phone", "addr"}),  // dup collapses
      gold_of(g1, "byname", {}),  // differs in one goal slot only
  };
  CHECK(accuracy(hyps, golds, Macro::kGoal) == 0.5);  // joint: 3 of 4 is a miss
  CHECK(accuracy(hyps, golds, Macro::kMethod) == 1.0);
  CHECK(accuracy(hyps, golds, Macro::kRequested) == 1.0);

  golds[0].requested = {"addr"};
  CHECK(accuracy(hyps, golds, Macro::kRequested) == 0.5);

  CHECK_THROWS_AS(accuracy(hyps, {golds[0]}, Macro::kGoal), ValueError);
}

TEST_CASE("single-categorical L2 closed form") {
  CHECK(l2_categorical({0.0, 1.0, 0.0}, 1) == 0.0);
  CHECK(l2_categorical({0.5, 0.5}, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  // Wrong one-hot: distance sqrt(2), the diameter of the simplex.
  CHECK(l2_categorical({1.0, 0.0}, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(l2_categorical({0.5, 0.6}, 0), ValueError);
  CHECK_THROWS_AS(l2_categorical({0.5, 0.5}, 2), ValueError);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_simplex(rng, 2 + rng.uniform_index(3));
    std::size_t gold = rng.uniform_index(p.size());
    double direct = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) {
      double diff = p[v] - (v == gold ? 1.0 : 0.0);
      direct += diff * diff;
    }
    CHECK(l2_categorical(p, gold) ==
          doctest::Approx(std::sqrt(direct)).epsilon(1e-12));
  }
}

TEST_CASE("joint categorical L2 equals brute-force enumeration") {
  Rng rng(17);
  // The fixed 3x3x2x2 shape plus random shapes with up to 4 values per slot.
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::size_t> shape;
    if (trial == 0) {
      shape = {3, 3, 2, 2};
    } else {
      std::size_t k = 1 + rng.uniform_index(4);
      for (std::size_t i = 0; i < k; ++i) shape.push_back(2 + rng.uniform_index(3));
    }
    std::vector<std::vector<double>> probs;
    std::vector<std::size_t> golds;
    for (auto n : shape) {
      probs.push_back(random_simplex(rng, n));
      golds.push_back(rng.uniform_index(n));
    }
    double closed = l2_joint_categorical(probs, golds);
    double brute = brute_joint_categorical(probs, golds);
    CHECK(std::abs(closed - brute) < 1e-9);
  }
  // Single-component joint degenerates to the plain categorical form.
  auto p = random_simplex(rng, 4);
  CHECK(l2_joint_categorical({p}, {2}) == doctest::Approx(l2_categorical(p, 2)));
}

TEST_CASE("joint Bernoulli L2 equals brute-force enumeration") {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng.uniform_index(6);
    std::vector<double> probs(n);
    std::vector<int> targets(n);
    for (std::size_t s = 0; s < n; ++s) {
      probs[s] = rng.uniform();
      targets[s] = rng.uniform_index(2) == 0 ? 0 : 1;
    }
    double closed = l2_joint_bernoulli(probs, targets);
    double brute = brute_joint_bernoulli(probs, targets);
    CHECK(std::abs(closed - brute) < 1e-9);
  }
  CHECK_THROWS_AS(l2_joint_bernoulli({1.2}, {1}), ValueError);
  CHECK_THROWS_AS(l2_joint_bernoulli({0.4}, {2}), ValueError);
  // Perfect prediction.
  CHECK(l2_joint_bernoulli({1.0, 0.0, 1.0}, {1, 0, 1}) == 0.0);
}

TEST_CASE("a zero-weight ensemble hypothesizes the default state") {
  auto fx = make_fixture();
  for (std::size_t c = 0; c < fx.ensemble.size(); ++c) {
    for (auto* p : fx.ensemble.model(c).parameters()) p->value.fill(0.0);
  }
  auto tracked = track_dialog(fx.ensemble, fx.corpus.dialogs[0]);
  auto h = extract_hypothesis(fx.ensemble, tracked.turns[0].final);
  CHECK(h.goal.pricerange == "none");
  CHECK(h.goal.area == "none");
  CHECK(h.goal.name == "none");
  CHECK(h.goal.food == "none");
  CHECK(h.method == "none");
  CHECK(h.requested.empty());
}

TEST_CASE("the full-ratio curve column reproduces the full tracker") {
  auto fx = make_fixture();
  auto rows = prefix_accuracy_curve(fx.ensemble, fx.corpus, {0.3, 1.0});
  REQUIRE(rows.size() == 2);
  auto full = evaluate_deterministic(fx.ensemble, fx.corpus, 1.0, "dev");
  CHECK(rows[1].goal_acc == full.goal.accuracy);
  CHECK(rows[1].method_acc == full.method.accuracy);
  CHECK(rows[1].requested_acc == full.requested.accuracy);
  CHECK(full.realized_ratio == 1.0);

  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(0.1 * i);
  auto ten = prefix_accuracy_curve(fx.ensemble, fx.corpus, grid);
  CHECK(ten.size() == 10);

  CHECK_THROWS_AS(prefix_accuracy_curve(fx.ensemble, fx.corpus, {}), ValueError);
  CHECK_THROWS_AS(prefix_accuracy_curve(fx.ensemble, fx.corpus, {0.0}), ValueError);
}

TEST_CASE("histogram rows partition the turns by length") {
  auto fx = make_fixture();
  std::vector<DecisionTrace> traces;
  std::map<int, std::size_t> turns_of_length;
  for (const auto& dialog : fx.corpus.dialogs) {
    traces.push_back(run_incremental(fx.ensemble, fx.heads, dialog, 0.6));
    for (const auto& t : dialog.turns) {
      if (!t.user_tokens.empty()) ++turns_of_length[static_cast<int>(t.user_tokens.size())];
    }
  }
  auto cells = take_histogram(traces);
  std::map<int, std::size_t> row_totals;
  for (const auto& cell : cells) {
    CHECK(cell.take_index >= 1);
    CHECK(cell.take_index <= cell.length);
    row_totals[cell.length] += cell.count;
  }
  CHECK(row_totals == turns_of_length);

  // A zero threshold concentrates every cell at the first token.
  std::vector<DecisionTrace> eager;
  for (const auto& dialog : fx.corpus.dialogs) {
    eager.push_back(run_incremental(fx.ensemble, fx.heads, dialog, 0.0));
  }
  for (const auto& cell : take_histogram(eager)) {
    CHECK(cell.take_index == 1);
  }
}

TEST_CASE("the comparison report degenerates to two identical columns") {
  auto fx = make_fixture(6, 6);
  auto report = compare_report(fx.ensemble, fx.heads, fx.corpus, 1.0, 1.5, "dev");
  CHECK(report.fixed.goal.accuracy == report.learned.goal.accuracy);
  CHECK(report.fixed.goal.l2 == report.learned.goal.l2);
  CHECK(report.fixed.method.accuracy == report.learned.method.accuracy);
  CHECK(report.fixed.method.l2 == report.learned.method.l2);
  CHECK(report.fixed.requested.accuracy == report.learned.requested.accuracy);
  CHECK(report.fixed.requested.l2 == report.learned.requested.l2);
  CHECK(report.fixed.realized_ratio == 1.0);
  CHECK(report.learned.realized_ratio == 1.0);
  CHECK(report.fixed.turns == report.learned.turns);

  auto text = report.to_text();
  CHECK(text.find("r=1") != std::string::npos);
  CHECK(text.find("d=1.5") != std::string::npos);
  CHECK(text.find("Goal") != std::string::npos);
  CHECK(text.find("Requested") != std::string::npos);
  CHECK(text.find("realized ratio") != std::string::npos);
}

TEST_CASE("trace evaluation rejects mismatched artifacts") {
  auto fx = make_fixture(7, 4);
  std::vector<DecisionTrace> traces;
  for (const auto& dialog : fx.corpus.dialogs) {
    traces.push_back(run_incremental(fx.ensemble, fx.heads, dialog, 0.5));
  }
  traces.pop_back();
  CHECK_THROWS_AS(evaluate_traces(fx.ensemble, traces, fx.corpus, 0.5, "dev"),
                  ConfigError);

  traces.push_back(run_incremental(fx.ensemble, fx.heads, fx.corpus.dialogs[0], 0.5));
  traces.back().dialog_id = "someone-else";
  CHECK_THROWS_AS(evaluate_traces(fx.ensemble, traces, fx.corpus, 0.5, "dev"),
                  ConfigError);
}

TEST_CASE("threshold sweep tracks the realized ratio monotonically") {
  auto fx = make_fixture(8, 8);
  std::vector<double> grid = {0.0, 0.3, 0.5, 0.7, 0.9, 1.5};
  auto sweep = sweep_threshold(fx.ensemble, fx.heads, fx.corpus, 0.6, grid);
  REQUIRE(sweep.points.size() == grid.size());
  for (std::size_t i = 1; i < sweep.points.size(); ++i) {
    CHECK(sweep.points[i].realized >= sweep.points[i - 1].realized);
  }
  // Degenerate endpoints: d=0 takes at token one; unreachable d at the end.
  CHECK(sweep.points.back().realized == 1.0);
  double best_gap = 2.0;
  double expect_d = 0.0;
  for (const auto& p : sweep.points) {
    if (std::abs(p.realized - 0.6) < best_gap) {
      best_gap = std::abs(p.realized - 0.6);
      expect_d = p.d;
    }
  }
  CHECK(sweep.best_d == expect_d);

  CHECK_THROWS_AS(sweep_threshold(fx.ensemble, fx.heads, fx.corpus, 0.6, {}),
                  ValueError);
}

TEST_CASE("CSV outputs carry the advertised columns") {
  auto dir = std::filesystem::temp_directory_path() /
             ("itrack-eval-" + std::to_string(std::rand()));
  std::filesystem::create_directories(dir);

  auto fx = make_fixture(9, 4);
  auto rows = prefix_accuracy_curve(fx.ensemble, fx.corpus, {0.5, 1.0});
  auto curve_path = (dir / "curve.csv").string();
  save_curve_csv(rows, curve_path);
  {
    std::ifstream in(curve_path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "ratio,goal_acc,method_acc,requested_acc");
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == rows.size());
  }

  std::vector<DecisionTrace> traces;
  for (const auto& dialog : fx.corpus.dialogs) {
    traces.push_back(run_incremental(fx.ensemble, fx.heads, dialog, 0.5));
  }
  auto cells = take_histogram(traces);
  auto hist_path = (dir / "hist.csv").string();
  save_histogram_csv(cells, hist_path);
  {
    std::ifstream in(hist_path);
    std::string comment, header;
    REQUIRE(std::getline(in, comment));
    CHECK(comment.front() == '#');
    CHECK(comment.find("raw counts") != std::string::npos);
    REQUIRE(std::getline(in, header));
    CHECK(header == "length,ratio,count");
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    CHECK(n == cells.size());
  }
  std::filesystem::remove_all(dir);
}
