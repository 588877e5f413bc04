// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace itrack {

enum class Speaker { kSystem, kUser };

// One observed token: surface form, optional vocabulary id (-1 until a
// vocabulary is bound), and the confidence score attached to it.
struct TokenObs {
  std::string surface;
  int token_id = -1;
  double confidence = 1.0;
  Speaker speaker = Speaker::kUser;
};

// Canonical goal slot order used everywhere: pricerange, area, name, food.
inline constexpr std::array<const char*, 4> kGoalSlotNames = {"pricerange", "area", "name",
                                                              "food"};

struct GoalAnnotation {
  std::string pricerange = "none";
  std::string area = "none";
  std::string name = "none";
  std::string food = "none";

  const std::string& slot(std::size_t i) const;
  std::string& slot(std::size_t i);
  bool operator==(const GoalAnnotation&) const = default;
};

// Gold dialog state for one turn.
struct TurnAnnotation {
  GoalAnnotation goal;
  std::string method = "none";
  std::vector<std::string> requested;  // slot names, deduplicated
  bool operator==(const TurnAnnotation&) const = default;
};

struct Turn {
  // Raw fields, preserved verbatim for lossless round-trips.
  std::string system_text;
  std::string asr_text;
  double asr_score = 1.0;
  std::string transcript_text;
  TurnAnnotation gold;

  // Token streams derived at load time according to the corpus mode.
  std::vector<TokenObs> system_tokens;
  std::vector<TokenObs> user_tokens;
};

struct Dialog {
  std::string id;
  std::vector<Turn> turns;
};

enum class CorpusMode { kAsr, kTranscript };

const char* to_string(CorpusMode mode);
CorpusMode corpus_mode_from_string(std::string_view s);

struct Corpus {
  CorpusMode mode = CorpusMode::kAsr;
  std::vector<Dialog> dialogs;
};

// Lowercase, trim, collapse internal whitespace. Punctuation is preserved.
std::string normalize_token(std::string_view raw);

// Whitespace split plus normalize_token on each piece.
std::vector<std::string> tokenize(std::string_view text);

// One JSON object per line; see the README for the schema. mode=asr takes
// user tokens from the ASR field with the utterance-level score applied to
// every token; mode=transcript takes the manual transcript with
// confidence 1.0. System tokens always carry the fixed confidence 1.0.
Corpus load_corpus(const std::string& path, CorpusMode mode);
Corpus parse_corpus(std::istream& in, CorpusMode mode);

void save_corpus(const Corpus& corpus, const std::string& path);
void serialize_corpus(const Corpus& corpus, std::ostream& out);

// Re-derives the token streams of every turn for the given mode.
void apply_mode(Corpus& corpus, CorpusMode mode);

// Aggregates over user utterances, mirroring the usual corpus analyses.
struct StatsReport {
  std::size_t num_dialogs = 0;
  std::size_t num_turns = 0;
  std::size_t num_distinct_tokens = 0;
  std::size_t max_seq_length = 0;
  double avg_tokens_per_turn = 0.0;
  double avg_turns_per_dialog = 0.0;

  std::string to_json() const;
};

StatsReport corpus_stats(const Corpus& corpus);

}  // namespace itrack
