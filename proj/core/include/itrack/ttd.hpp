// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itrack/model.hpp"
#include "itrack/relabel.hpp"

namespace itrack {

// Binary take/wait decider head over one component's frozen tracker hidden
// vector: affine hidden_size -> 2 with log_softmax; output index 0 is the
// take-turn label, index 1 is wait.
struct TTDHead {
  std::string component;
  nn::Affine affine;

  // Initializes uniformly in +-1/sqrt(hidden_size) from a stream derived
  // from (seed, component), so heads are independent of ordering.
  static TTDHead create(const std::string& component, std::size_t hidden_size,
                        std::uint64_t seed);

  std::size_t hidden_size() const { return affine.in_features(); }
  std::vector<nn::Parameter*> parameters() { return affine.parameters(); }
  std::vector<const nn::Parameter*> parameters() const {
    return {&affine.w, &affine.b};
  }
  void zero_grads();
};

struct TakeProbability {
  double take = 0.0;  // p(label 0 | h)
  double wait = 0.0;  // 1 - take
};

// log_softmax over the two logits, exponentiated; take + wait = 1.
TakeProbability ttd_forward(const TTDHead& head, const Vector& h);

struct TTDEpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TTDTrainConfig {
  int epochs = 10;
  std::uint64_t seed = 0;
  // Scale each class's loss by inverse frequency; off by default.
  bool reweight_classes = false;
  nn::OptimizerConfig optimizer;
  // Progress hook, called after each epoch; never affects the parameter or
  // shuffle streams.
  std::function<void(const std::string& component, const TTDEpochStats&)> on_epoch;

  void validate() const;
};

struct TTDTrainSummary {
  std::string component;
  std::vector<TTDEpochStats> history;
  std::int64_t optimizer_steps = 0;
};

struct TTDTrainResult {
  std::vector<TTDHead> heads;  // ensemble component order
  std::vector<TTDTrainSummary> summaries;
};

// Trains one head per component on the relabeled dataset's (h, label) pairs.
// The tracker is frozen: only the 2-row affine learns. Gradients accumulate
// over each dialog's tokens with one optimizer step per dialog per epoch,
// in seeded shuffled dialog order. Throws ConfigError when the dataset does
// not belong to this ensemble (fingerprint or component mismatch) or lacks
// hidden vectors; DivergenceError on non-finite loss.
TTDTrainResult train_ttd(const RelabelDataset& dataset, const TrackerEnsemble& ensemble,
                         const TTDTrainConfig& config);

// Per-component fraction of dataset tokens whose predicted label (argmax of
// take/wait) matches the stored label. Requires hidden vectors.
std::vector<double> ttd_token_accuracy(const std::vector<TTDHead>& heads,
                                       const RelabelDataset& dataset);

// The all-components rule: take iff every component's take probability is at
// least d.
bool decide(const std::vector<double>& p_take, double d);

struct DecisionTurn {
  int n_tokens = 0;    // user tokens in the turn
  int take_index = 0;  // 1-based token index where the decision fired; 0 if no tokens
  bool forced = false; // threshold never crossed; hypothesis taken at the end
  // Per user token, per component: p(take) after encoding that token.
  std::vector<std::vector<double>> p_take;
  // Product of component take-probabilities at the take token (the joint
  // confidence; the decision itself uses the min rule).
  double product_at_take = 0.0;
  // Distributions and hidden vectors frozen at the take token; used for
  // scoring. For a token-less turn this is the post-system fallback.
  TrackedStep scored;
};

struct DecisionTrace {
  std::string dialog_id;
  std::vector<DecisionTurn> turns;
};

// Streams the dialog token by token. Within a turn the hypothesis freezes at
// the first user token where decide() fires (or at the last token, forced,
// when it never fires); encoding always continues over the remaining tokens
// so later turns see the same history as a full-pass tracker.
DecisionTrace run_incremental(const TrackerEnsemble& ensemble,
                              const std::vector<TTDHead>& heads, const Dialog& dialog,
                              double d);

// Line-oriented JSON export of traces: a header with the component order and
// threshold, then one record per turn with the take point, the per-component
// take probabilities at that point, and their product.
void save_traces(const std::vector<DecisionTrace>& traces,
                 const std::vector<std::string>& components, double d,
                 const std::string& path);

}  // namespace itrack
