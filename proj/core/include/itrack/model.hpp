// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "itrack/components.hpp"
#include "itrack/corpus.hpp"
#include "itrack/nn.hpp"
#include "itrack/vocab.hpp"

namespace itrack {

// Encoder-classifier dimensions. The defaults match the reference
// configuration; num_embeddings must cover the bound vocabulary.
struct ModelConfig {
  std::size_t num_embeddings = 897;
  std::size_t embedding_dim = 170;
  std::size_t emb_plus_out = 300;
  std::size_t hidden_size = 100;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

using EncoderState = nn::LstmState;

// Output of one classifier head. Categorical components carry a full
// probability simplex plus its log form; the multilabel component carries
// independent per-slot probabilities.
struct ComponentDistribution {
  ComponentKind kind = ComponentKind::kCategorical;
  Vector probs;
  Vector log_probs;  // categorical only

  // Hypothesis extraction: ties resolve to the lowest index.
  std::size_t argmax() const;
  // Multilabel hypothesis: slots with p strictly above 0.5.
  std::vector<std::size_t> active_slots() const;
};

// One tracker: embedding -> confidence-fused affine -> LSTM -> head. Each
// state component owns a full independent copy of this stack.
struct TrackerModel {
  ModelConfig config;
  ComponentSpec spec;
  Vocabulary vocab;

  nn::Parameter embedding;  // num_embeddings x embedding_dim
  nn::Affine emb_plus;      // (embedding_dim + 1) -> emb_plus_out
  nn::LstmCell lstm;        // emb_plus_out -> hidden_size
  nn::Affine head;          // hidden_size -> spec.size()

  static TrackerModel create(const ModelConfig& config, const ComponentSpec& spec,
                             const Vocabulary& vocab, std::uint64_t seed);

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grads();
};

// Zero context and hidden vectors.
EncoderState init_state(const TrackerModel& model);

// Forward caches for one encoder step, consumed by encode_backward.
struct EncodeCache {
  int token_id = -1;
  Vector x;  // embedding row with the confidence appended
  nn::LstmCache lstm;
};

// One token through embedding, confidence fusion, and the LSTM.
EncoderState encode_step(const TrackerModel& model, const EncoderState& state, int token_id,
                         double confidence, EncodeCache* cache = nullptr);

struct EncodeBack {
  Vector dc_prev, dh_prev;
};

// Backward through one encoder step; accumulates parameter gradients into
// the model's grad buffers and returns the gradients for the previous state.
EncodeBack encode_backward(TrackerModel& model, const EncodeCache& cache, const Vector& dc_next,
                           const Vector& dh_next);

// Head + output activation on a hidden vector.
ComponentDistribution classify(const TrackerModel& model, const Vector& h);

// Per-dialog tracking record for a single component: a distribution and the
// encoder hidden vector after every user token, turn by turn. Turns with no
// user tokens record zero steps; `final` then falls back to the state after
// the turn's system tokens.
struct ComponentTrack {
  struct Step {
    ComponentDistribution dist;
    Vector h;
  };
  struct Turn {
    std::vector<Step> steps;
    Step final;
  };
  std::vector<Turn> turns;
};

ComponentTrack track_dialog_component(const TrackerModel& model, const Dialog& dialog);

// All components of one dialog, in ensemble order.
struct TrackedStep {
  std::vector<ComponentDistribution> dists;  // one per component
  std::vector<Vector> h;                     // hidden vector per component
};
struct TrackedTurn {
  std::vector<TrackedStep> steps;  // one per user token
  TrackedStep final;
};
struct TrackedDialog {
  std::vector<TrackedTurn> turns;
};

// A full tracker: one independent model per state component, fixed order.
class TrackerEnsemble {
 public:
  TrackerEnsemble() = default;
  explicit TrackerEnsemble(std::vector<TrackerModel> models);

  // Seeds each component's parameter stream from (seed, component name), so
  // a component's initial weights do not depend on its position.
  static TrackerEnsemble create(const ModelConfig& config,
                                const std::vector<ComponentSpec>& specs,
                                const Vocabulary& vocab, std::uint64_t seed);

  std::size_t size() const { return models_.size(); }
  TrackerModel& model(std::size_t i) { return models_.at(i); }
  const TrackerModel& model(std::size_t i) const { return models_.at(i); }
  TrackerModel* find(std::string_view name);
  const TrackerModel* find(std::string_view name) const;
  std::vector<std::string> component_names() const;

 private:
  std::vector<TrackerModel> models_;
};

TrackedDialog track_dialog(const TrackerEnsemble& ensemble, const Dialog& dialog);

// Token id a model feeds for an observation: the bound id when present,
// otherwise a vocabulary lookup (unknowns map to UNK).
int resolve_token_id(const TrackerModel& model, const TokenObs& tok);

}  // namespace itrack
