// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/vocab.hpp"

#include <set>

#include "itrack/errors.hpp"

namespace itrack {

Vocabulary::Vocabulary() { add(kUnkToken); }

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw ValueError("token id out of range: " + std::to_string(id));
  }
  return tokens_[id];
}

Vocabulary Vocabulary::build(const Corpus& train) {
  Vocabulary vocab;
  for (const auto& dialog : train.dialogs) {
    for (const auto& turn : dialog.turns) {
      for (const auto& tok : turn.system_tokens) vocab.add(tok.surface);
      for (const auto& tok : turn.user_tokens) vocab.add(tok.surface);
    }
  }
  if (vocab.size() == 1) throw ValueError("cannot build a vocabulary from an empty corpus");
  return vocab;
}

Vocabulary vocabulary_from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty() || tokens[0] != Vocabulary::kUnkToken) {
    throw ValueError("vocabulary token list must start with the unknown token");
  }
  Vocabulary vocab;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    int id = vocab.add(tokens[i]);
    if (id != static_cast<int>(i)) {
      throw ValueError("vocabulary token list has duplicates: " + tokens[i]);
    }
  }
  return vocab;
}

void bind_vocabulary(Corpus& corpus, const Vocabulary& vocab) {
  for (auto& dialog : corpus.dialogs) {
    for (auto& turn : dialog.turns) {
      for (auto& tok : turn.system_tokens) tok.token_id = vocab.lookup(tok.surface);
      for (auto& tok : turn.user_tokens) tok.token_id = vocab.lookup(tok.surface);
    }
  }
}

double oov_rate(const Vocabulary& vocab, const Corpus& eval) {
  std::set<std::string> types;
  for (const auto& dialog : eval.dialogs) {
    for (const auto& turn : dialog.turns) {
      for (const auto& tok : turn.user_tokens) types.insert(tok.surface);
    }
  }
  if (types.empty()) return 0.0;
  std::size_t missing = 0;
  for (const auto& t : types) {
    if (vocab.lookup(t) == Vocabulary::kUnkId) ++missing;
  }
  return static_cast<double>(missing) / static_cast<double>(types.size());
}

}  // namespace itrack
