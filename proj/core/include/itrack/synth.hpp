// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "itrack/corpus.hpp"

namespace itrack {

// Seeded restaurant-dialog generator used for desk-scale experiments. Each
// dialog is template-built from sampled goal/method/requested annotations;
// the gold annotation is emitted alongside the text. Surface forms are
// single tokens, so a value's position in an utterance can be recovered by
// searching the token stream for synth_surface_form(value).
struct SynthOptions {
  std::uint64_t seed = 0;
  int n_dialogs = 100;
  // Confidence noise level: each user utterance gets asr_score = 1 - noise*u
  // with u uniform in [0,1); noise also drives occasional filler insertions
  // in the decoded (asr) stream.
  double noise = 0.0;
};

Corpus gen_synthetic_corpus(const SynthOptions& opts);

// Token a goal value takes inside a generated utterance ("any" for
// "dontcare", the value itself otherwise).
std::string synth_surface_form(std::string_view value);

// Token that marks a slot request in a generated utterance.
std::string synth_request_keyword(std::string_view slot);

}  // namespace itrack
