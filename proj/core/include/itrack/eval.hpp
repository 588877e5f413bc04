// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "itrack/model.hpp"
#include "itrack/ttd.hpp"

namespace itrack {

// The three reported macro-components: the four goal slots scored jointly,
// the method, and the requested-slot set.
enum class Macro { kGoal, kMethod, kRequested };

// Token index (1-based) where a fixed-ratio decider takes the turn on an
// n-token utterance: round(r*n) with half away from zero, clamped to [1, n].
// Requires n >= 1 and 0 < r <= 1.
int deterministic_take_index(int n, double r);

// Mean of take_index/length over turns. Lists must align, lengths must be
// positive, and at least one turn is required (the ratio is undefined on an
// empty set).
double realized_ratio(const std::vector<int>& take_indices,
                      const std::vector<int>& lengths);

// A tracker output reduced to comparable values: argmax value per
// categorical component, sorted active-slot names for the requested set.
struct TurnHypothesis {
  GoalAnnotation goal;
  std::string method = "none";
  std::vector<std::string> requested;  // sorted
};

TurnHypothesis extract_hypothesis(const TrackerEnsemble& ensemble,
                                  const TrackedStep& step);

// Fraction of turns whose hypothesis matches gold: all four goal slots
// jointly, method by equality, requested by exact set equality.
double accuracy(const std::vector<TurnHypothesis>& hypotheses,
                const std::vector<TurnAnnotation>& golds, Macro macro);

// ---------------------------------------------------------------------------
// L2 between the tracker's (product) distribution and the one-hot gold.
// Closed forms; each is checked against brute-force joint enumeration in the
// test suite. Categorical inputs must sum to 1 within 1e-6.
// ---------------------------------------------------------------------------

// Single categorical component: sqrt(sum_v (p_v - 1[v = gold])^2).
double l2_categorical(const std::vector<double>& probs, std::size_t gold);

// Product of independent categoricals against a joint one-hot:
// L2^2 = prod_i(sum_v p_i(v)^2) - 2 * prod_i p_i(gold_i) + 1.
double l2_joint_categorical(const std::vector<std::vector<double>>& probs,
                            const std::vector<std::size_t>& golds);

// Product of independent Bernoullis against a one-hot on the target subset:
// L2^2 = prod_s(p_s^2 + (1-p_s)^2) - 2 * prod_s(t_s ? p_s : 1-p_s) + 1.
double l2_joint_bernoulli(const std::vector<double>& probs,
                          const std::vector<int>& targets);

// Mean over turns of the macro-component L2 computed from tracker steps.
// Gold values missing from a component's value set contribute probability 0.
double l2_metric(const TrackerEnsemble& ensemble,
                 const std::vector<TrackedStep>& steps,
                 const std::vector<TurnAnnotation>& golds, Macro macro);

struct MacroMetrics {
  double accuracy = 0.0;
  double l2 = 0.0;
};

struct EvalReport {
  std::string decider;  // e.g. "r=0.60" or "d=0.85"
  std::string split;
  MacroMetrics goal, method, requested;
  double realized_ratio = 0.0;  // over turns with at least one user token
  std::size_t turns = 0;        // turns scored
};

// Scores the fixed-ratio decider: each turn's hypothesis is read at
// deterministic_take_index(n, r); token-less turns score the post-system
// fallback and are excluded from the realized ratio.
EvalReport evaluate_deterministic(const TrackerEnsemble& ensemble, const Corpus& corpus,
                                  double r, const std::string& split);

// Scores decision traces (from run_incremental) against the corpus golds.
// The traces must align with the corpus dialog for dialog, turn for turn.
EvalReport evaluate_traces(const TrackerEnsemble& ensemble,
                           const std::vector<DecisionTrace>& traces,
                           const Corpus& corpus, double d, const std::string& split);

// Runs the learned decider over the corpus, then scores it.
EvalReport evaluate_incremental(const TrackerEnsemble& ensemble,
                                const std::vector<TTDHead>& heads, const Corpus& corpus,
                                double d, const std::string& split);

// Re-derives the take index a threshold d would produce from a turn's
// recorded per-token take probabilities (the probabilities do not depend on
// d, so one trace serves every threshold). Returns 0 for token-less turns.
int take_index_for(const DecisionTurn& turn, double d);

struct CurveRow {
  double ratio = 0.0;
  double goal_acc = 0.0;
  double method_acc = 0.0;
  double requested_acc = 0.0;
};

// Per-macro accuracy at each fixed ratio in the grid.
std::vector<CurveRow> prefix_accuracy_curve(const TrackerEnsemble& ensemble,
                                            const Corpus& corpus,
                                            const std::vector<double>& grid);
void save_curve_csv(const std::vector<CurveRow>& rows, const std::string& path);

// Raw take-point counts keyed by (utterance length, take index); the ratio
// column is take_index/length. Counts are not clipped (display clipping is a
// plotting choice and is noted in the file's comment header).
struct HistogramCell {
  int length = 0;
  int take_index = 0;
  std::size_t count = 0;
};
std::vector<HistogramCell> take_histogram(const std::vector<DecisionTrace>& traces);
void save_histogram_csv(const std::vector<HistogramCell>& cells,
                        const std::string& path);

// Side-by-side evaluation of the fixed-ratio and learned deciders on one
// corpus, with a per-cell winner (higher accuracy, lower L2).
struct CompareReport {
  EvalReport fixed;
  EvalReport learned;

  std::string to_text() const;
};
CompareReport compare_report(const TrackerEnsemble& ensemble,
                             const std::vector<TTDHead>& heads, const Corpus& corpus,
                             double r, double d, const std::string& split);

// Realized ratio for each threshold in the grid (one tracker pass total),
// and the grid value whose ratio lands nearest the target.
struct SweepPoint {
  double d = 0.0;
  double realized = 0.0;
};
struct SweepResult {
  double best_d = 0.0;
  std::vector<SweepPoint> points;
};
SweepResult sweep_threshold(const TrackerEnsemble& ensemble,
                            const std::vector<TTDHead>& heads, const Corpus& corpus,
                            double target_ratio, const std::vector<double>& grid);

}  // namespace itrack
