// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itrack/corpus.hpp"

namespace itrack {

enum class ComponentKind { kCategorical, kMultilabel };

const char* to_string(ComponentKind kind);
ComponentKind component_kind_from_string(std::string_view s);

// One tracked state component. Categorical components predict a single value
// out of `values`; the multilabel component treats `values` as independent
// slots, each on or off.
struct ComponentSpec {
  std::string name;
  ComponentKind kind = ComponentKind::kCategorical;
  std::vector<std::string> values;

  std::size_t size() const { return values.size(); }
  std::optional<std::size_t> index_of(std::string_view value) const;
  // Throws ValueError on unknown values; gold annotations must resolve.
  std::size_t require_index(std::string_view value) const;
  void validate() const;

  bool operator==(const ComponentSpec&) const = default;
};

// The canonical component order: pricerange, area, name, food, method,
// requested. Goal slots come first and share indices with kGoalSlotNames.
inline constexpr std::size_t kNumComponents = 6;
inline constexpr std::size_t kMethodComponent = 4;
inline constexpr std::size_t kRequestedComponent = 5;

std::vector<std::string> default_method_values();
std::vector<std::string> default_requested_slots();

// Builds the six specs. Goal value sets are collected from the training
// annotations in first-occurrence order, prefixed with the distinguished
// values "none" and "dontcare".
std::vector<ComponentSpec> build_component_specs(const Corpus& train);

// For categorical components (index 0..4): position of the turn's gold value.
std::size_t gold_value_index(const ComponentSpec& spec, std::size_t component,
                             const TurnAnnotation& gold);

// Same lookup, resolving the component by the spec's name.
std::size_t gold_value_index(const ComponentSpec& spec, const TurnAnnotation& gold);

// For the multilabel component: 0/1 targets per slot.
std::vector<double> gold_requested_targets(const ComponentSpec& spec, const TurnAnnotation& gold);

std::string component_specs_to_json(const std::vector<ComponentSpec>& specs);
std::vector<ComponentSpec> component_specs_from_json(const std::string& text);

}  // namespace itrack
