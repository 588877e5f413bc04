// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/components.hpp"

#include <algorithm>
#include <set>

#include "itrack/errors.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

using ordered_json = nlohmann::ordered_json;

const char* to_string(ComponentKind kind) {
  return kind == ComponentKind::kCategorical ? "categorical" : "multilabel";
}

ComponentKind component_kind_from_string(std::string_view s) {
  if (s == "categorical") return ComponentKind::kCategorical;
  if (s == "multilabel") return ComponentKind::kMultilabel;
  throw ValueError("unknown component kind: " + std::string(s));
}

std::optional<std::size_t> ComponentSpec::index_of(std::string_view value) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == value) return i;
  }
  return std::nullopt;
}

std::size_t ComponentSpec::require_index(std::string_view value) const {
  if (auto idx = index_of(value)) return *idx;
  throw ValueError("component '" + name + "' has no value '" + std::string(value) + "'");
}

void ComponentSpec::validate() const {
  if (name.empty()) throw ValueError("component name must not be empty");
  if (values.empty()) throw ValueError("component '" + name + "' has no values");
  std::set<std::string> seen(values.begin(), values.end());
  if (seen.size() != values.size()) {
    throw ValueError("component '" + name + "' has duplicate values");
  }
  if (kind == ComponentKind::kCategorical && !index_of("none")) {
    throw ValueError("categorical component '" + name + "' must include 'none'");
  }
}

std::vector<std::string> default_method_values() {
  return {"none", "byconstraints", "byname", "byalternatives", "finished"};
}

std::vector<std::string> default_requested_slots() {
  return {"area", "food", "pricerange", "addr", "phone", "postcode", "name", "signature"};
}

std::vector<ComponentSpec> build_component_specs(const Corpus& train) {
  std::vector<ComponentSpec> specs(kNumComponents);
  for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
    auto& spec = specs[s];
    spec.name = kGoalSlotNames[s];
    spec.kind = ComponentKind::kCategorical;
    spec.values = {"none", "dontcare"};
    for (const auto& dialog : train.dialogs) {
      for (const auto& turn : dialog.turns) {
        const auto& v = turn.gold.goal.slot(s);
        if (!spec.index_of(v)) spec.values.push_back(v);
      }
    }
  }
  specs[kMethodComponent].name = "method";
  specs[kMethodComponent].kind = ComponentKind::kCategorical;
  specs[kMethodComponent].values = default_method_values();
  specs[kRequestedComponent].name = "requested";
  specs[kRequestedComponent].kind = ComponentKind::kMultilabel;
  specs[kRequestedComponent].values = default_requested_slots();
  for (auto& spec : specs) spec.validate();
  return specs;
}

std::size_t gold_value_index(const ComponentSpec& spec, std::size_t component,
                             const TurnAnnotation& gold) {
  if (spec.kind != ComponentKind::kCategorical) {
    throw ValueError("gold_value_index is only defined for categorical components");
  }
  if (component < kGoalSlotNames.size()) {
    return spec.require_index(gold.goal.slot(component));
  }
  if (component == kMethodComponent) return spec.require_index(gold.method);
  throw ValueError("bad categorical component index: " + std::to_string(component));
}

std::size_t gold_value_index(const ComponentSpec& spec, const TurnAnnotation& gold) {
  for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
    if (spec.name == kGoalSlotNames[s]) return gold_value_index(spec, s, gold);
  }
  if (spec.name == "method") return gold_value_index(spec, kMethodComponent, gold);
  throw ValueError("no gold value accessor for component '" + spec.name + "'");
}

std::vector<double> gold_requested_targets(const ComponentSpec& spec,
                                           const TurnAnnotation& gold) {
  if (spec.kind != ComponentKind::kMultilabel) {
    throw ValueError("gold_requested_targets needs the multilabel component");
  }
  std::vector<double> targets(spec.values.size(), 0.0);
  for (const auto& slot : gold.requested) {
    targets[spec.require_index(slot)] = 1.0;
  }
  return targets;
}

std::string component_specs_to_json(const std::vector<ComponentSpec>& specs) {
  ordered_json arr = ordered_json::array();
  for (const auto& spec : specs) {
    ordered_json j;
    j["name"] = spec.name;
    j["kind"] = to_string(spec.kind);
    j["values"] = spec.values;
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

std::vector<ComponentSpec> component_specs_from_json(const std::string& text) {
  ordered_json arr;
  try {
    arr = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValueError(std::string("invalid component spec JSON: ") + e.what());
  }
  if (!arr.is_array()) throw ValueError("component spec JSON must be an array");
  std::vector<ComponentSpec> specs;
  for (const auto& j : arr) {
    ComponentSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.kind = component_kind_from_string(j.at("kind").get<std::string>());
    spec.values = j.at("values").get<std::vector<std::string>>();
    spec.validate();
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace itrack
