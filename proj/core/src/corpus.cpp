// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/corpus.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "itrack/errors.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

using ordered_json = nlohmann::ordered_json;

const std::string& GoalAnnotation::slot(std::size_t i) const {
  switch (i) {
    case 0: return pricerange;
    case 1: return area;
    case 2: return name;
    case 3: return food;
    default: throw ValueError("goal slot index out of range: " + std::to_string(i));
  }
}

std::string& GoalAnnotation::slot(std::size_t i) {
  return const_cast<std::string&>(static_cast<const GoalAnnotation&>(*this).slot(i));
}

const char* to_string(CorpusMode mode) {
  return mode == CorpusMode::kAsr ? "asr" : "transcript";
}

CorpusMode corpus_mode_from_string(std::string_view s) {
  if (s == "asr") return CorpusMode::kAsr;
  if (s == "transcript") return CorpusMode::kTranscript;
  throw ValueError("unknown corpus mode: " + std::string(s));
}

std::string normalize_token(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(normalize_token(text.substr(start, i - start)));
  }
  return tokens;
}

namespace {

std::vector<TokenObs> make_tokens(const std::string& text, double confidence, Speaker speaker) {
  std::vector<TokenObs> out;
  for (auto& t : tokenize(text)) {
    out.push_back(TokenObs{std::move(t), -1, confidence, speaker});
  }
  return out;
}

void derive_tokens(Turn& turn, CorpusMode mode) {
  turn.system_tokens = make_tokens(turn.system_text, 1.0, Speaker::kSystem);
  if (mode == CorpusMode::kAsr) {
    turn.user_tokens = make_tokens(turn.asr_text, turn.asr_score, Speaker::kUser);
  } else {
    turn.user_tokens = make_tokens(turn.transcript_text, 1.0, Speaker::kUser);
  }
}

// Context string for error messages while reading one record.
std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

std::string require_string(const ordered_json& obj, const char* key, std::size_t line,
                           const char* fallback = nullptr) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback != nullptr) return fallback;
    throw ParseError(std::string("missing field '") + key + "'", line);
  }
  if (!it->is_string()) {
    throw ParseError(std::string("field '") + key + "' must be a string", line);
  }
  return it->get<std::string>();
}

Turn parse_turn(const ordered_json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError("turn must be an object", line);
  Turn turn;
  turn.system_text = require_string(obj, "system", line, "");
  turn.asr_text = require_string(obj, "asr", line, "");
  turn.transcript_text = require_string(obj, "transcript", line, "");
  if (auto it = obj.find("asr_score"); it != obj.end()) {
    if (!it->is_number()) throw ParseError("field 'asr_score' must be a number", line);
    turn.asr_score = it->get<double>();
    if (!(turn.asr_score >= 0.0 && turn.asr_score <= 1.0)) {
      throw ParseError("asr_score outside [0, 1]", line);
    }
  }
  if (auto it = obj.find("goal"); it != obj.end()) {
    if (!it->is_object()) throw ParseError("field 'goal' must be an object", line);
    for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
      turn.gold.goal.slot(s) = require_string(*it, kGoalSlotNames[s], line, "none");
    }
  }
  turn.gold.method = require_string(obj, "method", line, "none");
  if (auto it = obj.find("requested"); it != obj.end()) {
    if (!it->is_array()) throw ParseError("field 'requested' must be an array", line);
    std::set<std::string> seen;
    for (const auto& item : *it) {
      if (!item.is_string()) throw ParseError("requested entries must be strings", line);
      auto slot = item.get<std::string>();
      if (seen.insert(slot).second) turn.gold.requested.push_back(std::move(slot));
    }
  }
  return turn;
}

}  // namespace

Corpus parse_corpus(std::istream& in, CorpusMode mode) {
  Corpus corpus;
  corpus.mode = mode;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!obj.is_object()) throw ParseError("record must be a JSON object", lineno);
    Dialog dialog;
    dialog.id = require_string(obj, "dialog_id", lineno);
    auto turns_it = obj.find("turns");
    if (turns_it == obj.end() || !turns_it->is_array()) {
      throw ParseError("missing or non-array field 'turns'", lineno);
    }
    for (const auto& t : *turns_it) {
      dialog.turns.push_back(parse_turn(t, lineno));
      derive_tokens(dialog.turns.back(), mode);
    }
    corpus.dialogs.push_back(std::move(dialog));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, CorpusMode mode) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open corpus file: " + path);
  return parse_corpus(in, mode);
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& dialog : corpus.dialogs) {
    ordered_json record;
    record["dialog_id"] = dialog.id;
    auto& turns = record["turns"] = ordered_json::array();
    for (const auto& turn : dialog.turns) {
      ordered_json t;
      t["system"] = turn.system_text;
      t["asr"] = turn.asr_text;
      t["asr_score"] = turn.asr_score;
      t["transcript"] = turn.transcript_text;
      ordered_json goal;
      for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
        goal[kGoalSlotNames[s]] = turn.gold.goal.slot(s);
      }
      t["goal"] = std::move(goal);
      t["method"] = turn.gold.method;
      t["requested"] = turn.gold.requested;
      turns.push_back(std::move(t));
    }
    out << record.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open output file: " + path);
  serialize_corpus(corpus, out);
}

void apply_mode(Corpus& corpus, CorpusMode mode) {
  corpus.mode = mode;
  for (auto& dialog : corpus.dialogs) {
    for (auto& turn : dialog.turns) derive_tokens(turn, mode);
  }
}

StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport r;
  r.num_dialogs = corpus.dialogs.size();
  std::set<std::string> distinct;
  std::size_t total_tokens = 0;
  for (const auto& dialog : corpus.dialogs) {
    r.num_turns += dialog.turns.size();
    for (const auto& turn : dialog.turns) {
      total_tokens += turn.user_tokens.size();
      r.max_seq_length = std::max(r.max_seq_length, turn.user_tokens.size());
      for (const auto& tok : turn.user_tokens) distinct.insert(tok.surface);
    }
  }
  r.num_distinct_tokens = distinct.size();
  r.avg_tokens_per_turn = r.num_turns == 0 ? 0.0 : double(total_tokens) / double(r.num_turns);
  r.avg_turns_per_dialog =
      r.num_dialogs == 0 ? 0.0 : double(r.num_turns) / double(r.num_dialogs);
  return r;
}

std::string StatsReport::to_json() const {
  ordered_json j;
  j["num_dialogs"] = num_dialogs;
  j["num_turns"] = num_turns;
  j["num_distinct_tokens"] = num_distinct_tokens;
  j["max_seq_length"] = max_seq_length;
  j["avg_tokens_per_turn"] = avg_tokens_per_turn;
  j["avg_turns_per_dialog"] = avg_turns_per_dialog;
  return j.dump(2);
}

}  // namespace itrack
