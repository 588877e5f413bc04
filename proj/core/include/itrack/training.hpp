// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "itrack/model.hpp"

namespace itrack {

struct EpochStats {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean dialog loss over the epoch
  double dev_accuracy = 0;
};

struct TrainConfig {
  int epochs = 30;
  // Consecutive epochs without a dev-accuracy improvement before training
  // stops early; 0 disables early stopping.
  int patience = 5;
  std::uint64_t seed = 0;
  nn::OptimizerConfig optimizer;
  // Progress hook, called after each epoch's dev pass; never affects the
  // parameter or shuffle streams.
  std::function<void(const std::string& component, const EpochStats&)> on_epoch;

  void validate() const;
};

struct ComponentTrainSummary {
  std::string component;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based
  double best_dev_accuracy = 0.0;
  std::int64_t optimizer_steps = 0;
};

struct TrainResult {
  TrackerModel model;  // parameters from the best dev epoch (ties -> earlier)
  ComponentTrainSummary summary;
};

struct EnsembleTrainResult {
  TrackerEnsemble ensemble;
  std::vector<ComponentTrainSummary> summaries;
};

struct TurnLossResult {
  double loss = 0.0;
  EncoderState state;
};

// Forward-only loss of one turn from an incoming state: system tokens update
// the state without loss; each user token adds the classification loss
// against the turn's gold (categorical: NLL of the gold value; multilabel:
// mean binary cross-entropy over slots). Throws ValueError when the gold
// value is outside the component spec.
TurnLossResult turn_loss(const TrackerModel& model, const EncoderState& state,
                         const Turn& turn, const TurnAnnotation& gold);

// Sum of turn losses over one dialog, threading the state through turns.
double dialog_loss(const TrackerModel& model, const Dialog& dialog);

// Same loss, plus backpropagation through the whole dialog; parameter
// gradients are accumulated into the model's grad buffers.
double dialog_loss_backward(TrackerModel& model, const Dialog& dialog);

// Fraction of turns whose final-token hypothesis matches gold for this
// model's component (zero-decision turns score the post-system fallback).
double component_turn_accuracy(const TrackerModel& model, const Corpus& corpus);

// Trains one component: per epoch, dialogs in seeded shuffled order, one
// optimizer step per dialog, dev accuracy after each epoch. Deterministic
// given (config.seed, spec.name); other components never affect the stream.
TrainResult train_component(const Corpus& train, const Corpus& dev,
                            const ModelConfig& model_config, const ComponentSpec& spec,
                            const Vocabulary& vocab, const TrainConfig& config);

// train_component over every spec, composed into an ensemble.
EnsembleTrainResult train_ensemble(const Corpus& train, const Corpus& dev,
                                   const ModelConfig& model_config,
                                   const std::vector<ComponentSpec>& specs,
                                   const Vocabulary& vocab, const TrainConfig& config);

std::string summaries_to_json(const std::vector<ComponentTrainSummary>& summaries);

}  // namespace itrack
