// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "itrack/model.hpp"
#include "itrack/ttd.hpp"

namespace itrack {

// Checkpoint files carry a single-line structured-text header (format
// version, model dimensions, component spec, vocabulary, tensor directory,
// payload fingerprint) followed by the named parameter tensors as raw
// little-endian 64-bit reals in declared order. Round trips are bit-exact.

// 16-hex-char digest of a model's parameter payload; identifies the exact
// weights independent of where they are stored.
std::string tracker_fingerprint(const TrackerModel& model);

// Writes the model and returns its fingerprint.
std::string save_tracker(const TrackerModel& model, const std::string& path);
TrackerModel load_tracker(const std::string& path);

// An ensemble is stored as one checkpoint per component plus a manifest
// ("manifest.json") listing components, files, fingerprints, and the
// combined ensemble fingerprint (a digest of the per-component digests in
// order). Returns the ensemble fingerprint.
std::string save_ensemble(const TrackerEnsemble& ensemble, const std::string& dir);
TrackerEnsemble load_ensemble(const std::string& dir);
std::string ensemble_fingerprint(const TrackerEnsemble& ensemble);

// Decider heads are stored together in one file, stamped with the
// fingerprint of the ensemble they were trained against so mismatched
// artifacts are rejected at load/eval time.
struct TTDCheckpoint {
  std::string ensemble_fingerprint;
  std::vector<TTDHead> heads;
};

std::string save_ttd(const std::vector<TTDHead>& heads,
                     const std::string& ensemble_fingerprint, const std::string& path);
TTDCheckpoint load_ttd(const std::string& path);

}  // namespace itrack
