// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace itrack {

// FNV-1a over a string, used to derive per-component seed streams.
std::uint64_t fnv1a64(std::string_view s);

// splitmix64-style mixer; combines a master seed with a stream tag.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Deterministic RNG. mt19937_64 output is pinned by the standard, and the
// mappings below avoid std::uniform_* distributions, whose sequences are
// implementation-defined. Identical seeds yield identical streams on any
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Modulo bias is negligible for the small n
  // used here and keeps the stream platform-stable.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform_index(v.size())];
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace itrack
