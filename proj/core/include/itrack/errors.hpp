// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace itrack {

// Operand shapes disagree (dimension mismatch, empty input where a
// non-empty one is required).
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A label, value or index lies outside its declared domain.
class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number of the offending
// record when known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Artifacts that do not belong together: vocabulary or fingerprint
// mismatch, or a pipeline stage invoked before its prerequisites exist.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient encountered during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace itrack
