// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "itrack/corpus.hpp"

namespace itrack {

// Token-to-id table. Id 0 is reserved for the unknown token; the rest are
// assigned in first-occurrence order so that a rebuild from the same corpus
// reproduces the same ids.
class Vocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  // Collects user and system tokens from every turn, in corpus order.
  static Vocabulary build(const Corpus& train);

  // Unknown tokens map to kUnkId.
  int lookup(std::string_view token) const;
  int add(const std::string& token);

  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary vocabulary_from_tokens(std::vector<std::string> tokens);

// Fills token_id on every token in place. Unknown tokens get kUnkId.
void bind_vocabulary(Corpus& corpus, const Vocabulary& vocab);

// Fraction of distinct user-token types in `eval` that are absent from the
// vocabulary. Returns 0 for a corpus with no user tokens.
double oov_rate(const Vocabulary& vocab, const Corpus& eval);

}  // namespace itrack
