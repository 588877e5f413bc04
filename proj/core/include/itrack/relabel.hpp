// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "itrack/model.hpp"

namespace itrack {

// Token-level turn-taking labels derived from the tracker's incremental
// hypotheses: a token gets label 0 when the hypothesis it induces already
// equals the turn-final hypothesis, 1 otherwise. The final token's label is
// therefore 0 by construction.

// A hypothesis reduced to a comparable key: the argmax index for categorical
// components, the sorted active-slot index set for multilabel ones.
std::vector<std::size_t> hypothesis_key(const ComponentDistribution& dist);

// The labeling rule on its own: labels[i] = 0 iff keys[i] == keys.back().
// Empty input yields an empty sequence.
std::vector<int> labels_from_hypotheses(const std::vector<std::vector<std::size_t>>& keys);

struct TurnRelabelResult {
  std::vector<int> labels;  // one per user token
  EncoderState state;       // encoder state after the whole turn
};

// Labels one turn for one component from the incoming encoder state. System
// tokens update the state without producing labels.
TurnRelabelResult relabel_turn(const TrackerModel& model, const EncoderState& state,
                               const Turn& turn);

// One dataset row per user token; `h` carries the per-component hidden
// vectors in ensemble order when the dataset came from a tracker run, and is
// empty on datasets loaded from disk (the vectors are recomputed on demand).
struct TokenLabelRecord {
  std::string dialog_id;
  int turn = 0;         // 0-based turn index within the dialog
  int token_index = 0;  // 0-based user-token index within the turn
  std::string surface;
  std::vector<int> labels;  // one per component, ensemble order
  std::vector<Vector> h;    // one hidden vector per component (may be empty)
};

struct RelabelDataset {
  std::string fingerprint;  // fingerprint of the ensemble that produced it
  std::vector<std::string> components;
  std::vector<TokenLabelRecord> records;
};

// Runs the full tracker over every dialog and labels every user token for
// every component. Deterministic: identical inputs give identical datasets.
// Throws ConfigError when the corpus carries token ids outside the
// ensemble's vocabulary (it was bound against a different vocabulary).
RelabelDataset relabel_corpus(const TrackerEnsemble& ensemble, const Corpus& corpus);

// Line-oriented JSON export: a header line carrying the ensemble fingerprint
// and component order, then one record per user token with the labels (the
// hidden vectors stay out of the file). Loading restores everything but `h`.
void save_relabeled(const RelabelDataset& dataset, const std::string& path);
RelabelDataset load_relabeled(const std::string& path);

}  // namespace itrack
