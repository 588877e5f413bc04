// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "itrack/errors.hpp"

namespace itrack {

int deterministic_take_index(int n, double r) {
  if (n < 1) throw ValueError("utterance length must be at least 1");
  if (!(r > 0.0 && r <= 1.0)) throw ValueError("ratio must lie in (0, 1]");
  auto idx = static_cast<int>(std::llround(r * static_cast<double>(n)));
  return std::clamp(idx, 1, n);
}

double realized_ratio(const std::vector<int>& take_indices,
                      const std::vector<int>& lengths) {
  if (take_indices.size() != lengths.size()) {
    throw ValueError("take-index and length lists differ in size");
  }
  if (take_indices.empty()) {
    throw ValueError("realized ratio is undefined over zero turns");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw ValueError("utterance length must be at least 1");
    sum += static_cast<double>(take_indices[i]) / static_cast<double>(lengths[i]);
  }
  return sum / static_cast<double>(take_indices.size());
}

TurnHypothesis extract_hypothesis(const TrackerEnsemble& ensemble,
                                  const TrackedStep& step) {
  if (step.dists.size() != ensemble.size()) {
    throw ShapeError("tracked step does not match the ensemble");
  }
  TurnHypothesis hyp;
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    const auto& spec = ensemble.model(c).spec;
    const auto& dist = step.dists[c];
    if (spec.kind == ComponentKind::kMultilabel) {
      for (auto idx : dist.active_slots()) hyp.requested.push_back(spec.values[idx]);
      std::sort(hyp.requested.begin(), hyp.requested.end());
      continue;
    }
    const auto& value = spec.values[dist.argmax()];
    if (spec.name == "method") {
      hyp.method = value;
    } else {
      bool found = false;
      for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
        if (spec.name == kGoalSlotNames[s]) {
          hyp.goal.slot(s) = value;
          found = true;
          break;
        }
      }
      if (!found) throw ValueError("unknown component in ensemble: " + spec.name);
    }
  }
  return hyp;
}

namespace {

std::vector<std::string> sorted_set(const std::vector<std::string>& v) {
  auto out = v;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool macro_correct(const TurnHypothesis& hyp, const TurnAnnotation& gold, Macro macro) {
  switch (macro) {
    case Macro::kGoal: return hyp.goal == gold.goal;
    case Macro::kMethod: return hyp.method == gold.method;
    case Macro::kRequested: return hyp.requested == sorted_set(gold.requested);
  }
  throw ValueError("unknown macro component");
}

}  // namespace

double accuracy(const std::vector<TurnHypothesis>& hypotheses,
                const std::vector<TurnAnnotation>& golds, Macro macro) {
  if (hypotheses.size() != golds.size()) {
    throw ValueError("hypothesis and gold lists differ in size");
  }
  if (hypotheses.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (macro_correct(hypotheses[i], golds[i], macro)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(hypotheses.size());
}

namespace {

constexpr double kSimplexTolerance = 1e-6;

void check_simplex(const std::vector<double>& probs) {
  if (probs.empty()) throw ShapeError("empty probability vector");
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw ValueError("categorical distribution does not sum to 1 (sum = " +
                     std::to_string(sum) + ")");
  }
}

double sum_squares(const std::vector<double>& probs) {
  double s = 0.0;
  for (double p : probs) s += p * p;
  return s;
}

// sqrt of L2^2 = prod(sum of squares) - 2 * prod(mass on gold) + 1, the
// expansion of ||p - onehot||^2 for a factorized joint distribution.
double joint_l2(double prod_sq, double prod_gold) {
  return std::sqrt(std::max(0.0, prod_sq - 2.0 * prod_gold + 1.0));
}

}  // namespace

double l2_categorical(const std::vector<double>& probs, std::size_t gold) {
  check_simplex(probs);
  if (gold >= probs.size()) throw ValueError("gold index out of range");
  return joint_l2(sum_squares(probs), probs[gold]);
}

double l2_joint_categorical(const std::vector<std::vector<double>>& probs,
                            const std::vector<std::size_t>& golds) {
  if (probs.size() != golds.size()) {
    throw ValueError("distribution and gold lists differ in size");
  }
  if (probs.empty()) throw ShapeError("empty joint distribution");
  double prod_sq = 1.0, prod_gold = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_simplex(probs[i]);
    if (golds[i] >= probs[i].size()) throw ValueError("gold index out of range");
    prod_sq *= sum_squares(probs[i]);
    prod_gold *= probs[i][golds[i]];
  }
  return joint_l2(prod_sq, prod_gold);
}

double l2_joint_bernoulli(const std::vector<double>& probs,
                          const std::vector<int>& targets) {
  if (probs.size() != targets.size()) {
    throw ValueError("probability and target lists differ in size");
  }
  if (probs.empty()) throw ShapeError("empty joint distribution");
  double prod_sq = 1.0, prod_gold = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValueError("Bernoulli probability outside [0, 1]");
    }
    if (targets[i] != 0 && targets[i] != 1) throw ValueError("target must be 0 or 1");
    prod_sq *= p * p + (1.0 - p) * (1.0 - p);
    prod_gold *= targets[i] == 1 ? p : 1.0 - p;
  }
  return joint_l2(prod_sq, prod_gold);
}

namespace {

// Per-turn L2 from the tracker's factorized outputs. Gold values absent
// from a component's value set carry probability zero.
double turn_l2(const TrackerEnsemble& ensemble, const TrackedStep& step,
               const TurnAnnotation& gold, Macro macro) {
  double prod_sq = 1.0, prod_gold = 1.0;
  bool any = false;
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    const auto& spec = ensemble.model(c).spec;
    const auto& dist = step.dists[c];
    if (macro == Macro::kRequested) {
      if (spec.kind != ComponentKind::kMultilabel) continue;
      for (std::size_t s = 0; s < spec.values.size(); ++s) {
        double p = dist.probs[s];
        if (!(p >= 0.0 && p <= 1.0)) {
          throw ValueError("Bernoulli probability outside [0, 1]");
        }
        bool target = std::find(gold.requested.begin(), gold.requested.end(),
                                spec.values[s]) != gold.requested.end();
        prod_sq *= p * p + (1.0 - p) * (1.0 - p);
        prod_gold *= target ? p : 1.0 - p;
      }
      any = true;
      continue;
    }
    if (spec.kind != ComponentKind::kCategorical) continue;
    bool is_method = spec.name == "method";
    if ((macro == Macro::kMethod) != is_method) continue;
    check_simplex(dist.probs);
    std::string gold_value = is_method ? gold.method : "none";
    if (!is_method) {
      for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
        if (spec.name == kGoalSlotNames[s]) gold_value = gold.goal.slot(s);
      }
    }
    auto idx = spec.index_of(gold_value);
    prod_sq *= sum_squares(dist.probs);
    prod_gold *= idx ? dist.probs[*idx] : 0.0;
    any = true;
  }
  if (!any) throw ValueError("ensemble has no component for the requested macro");
  return joint_l2(prod_sq, prod_gold);
}

std::string format_decider(const char* prefix, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return std::string(prefix) + "=" + s;
}

struct ScoredCorpus {
  std::vector<TrackedStep> steps;
  std::vector<TurnAnnotation> golds;
  std::vector<int> take_indices;  // turns with >= 1 user token only
  std::vector<int> lengths;
};

EvalReport report_from(const TrackerEnsemble& ensemble, const ScoredCorpus& scored,
                       const std::string& decider, const std::string& split) {
  EvalReport report;
  report.decider = decider;
  report.split = split;
  report.turns = scored.steps.size();
  std::vector<TurnHypothesis> hyps;
  hyps.reserve(scored.steps.size());
  for (const auto& step : scored.steps) hyps.push_back(extract_hypothesis(ensemble, step));
  report.goal.accuracy = accuracy(hyps, scored.golds, Macro::kGoal);
  report.method.accuracy = accuracy(hyps, scored.golds, Macro::kMethod);
  report.requested.accuracy = accuracy(hyps, scored.golds, Macro::kRequested);
  report.goal.l2 = l2_metric(ensemble, scored.steps, scored.golds, Macro::kGoal);
  report.method.l2 = l2_metric(ensemble, scored.steps, scored.golds, Macro::kMethod);
  report.requested.l2 =
      l2_metric(ensemble, scored.steps, scored.golds, Macro::kRequested);
  report.realized_ratio = realized_ratio(scored.take_indices, scored.lengths);
  return report;
}

}  // namespace

double l2_metric(const TrackerEnsemble& ensemble,
                 const std::vector<TrackedStep>& steps,
                 const std::vector<TurnAnnotation>& golds, Macro macro) {
  if (steps.size() != golds.size()) {
    throw ValueError("step and gold lists differ in size");
  }
  if (steps.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sum += turn_l2(ensemble, steps[i], golds[i], macro);
  }
  return sum / static_cast<double>(steps.size());
}

EvalReport evaluate_deterministic(const TrackerEnsemble& ensemble, const Corpus& corpus,
                                  double r, const std::string& split) {
  if (!(r > 0.0 && r <= 1.0)) throw ValueError("ratio must lie in (0, 1]");
  ScoredCorpus scored;
  for (const auto& dialog : corpus.dialogs) {
    auto tracked = track_dialog(ensemble, dialog);
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const auto& turn = tracked.turns[t];
      auto n = static_cast<int>(turn.steps.size());
      if (n >= 1) {
        int idx = deterministic_take_index(n, r);
        scored.steps.push_back(turn.steps[static_cast<std::size_t>(idx) - 1]);
        scored.take_indices.push_back(idx);
        scored.lengths.push_back(n);
      } else {
        scored.steps.push_back(turn.final);
      }
      scored.golds.push_back(dialog.turns[t].gold);
    }
  }
  return report_from(ensemble, scored, format_decider("r", r), split);
}

EvalReport evaluate_traces(const TrackerEnsemble& ensemble,
                           const std::vector<DecisionTrace>& traces,
                           const Corpus& corpus, double d, const std::string& split) {
  if (traces.size() != corpus.dialogs.size()) {
    throw ConfigError("trace count does not match the corpus");
  }
  ScoredCorpus scored;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& dialog = corpus.dialogs[i];
    if (traces[i].dialog_id != dialog.id ||
        traces[i].turns.size() != dialog.turns.size()) {
      throw ConfigError("trace does not align with dialog '" + dialog.id + "'");
    }
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const auto& turn = traces[i].turns[t];
      scored.steps.push_back(turn.scored);
      scored.golds.push_back(dialog.turns[t].gold);
      if (turn.n_tokens >= 1) {
        scored.take_indices.push_back(turn.take_index);
        scored.lengths.push_back(turn.n_tokens);
      }
    }
  }
  return report_from(ensemble, scored, format_decider("d", d), split);
}

EvalReport evaluate_incremental(const TrackerEnsemble& ensemble,
                                const std::vector<TTDHead>& heads, const Corpus& corpus,
                                double d, const std::string& split) {
  std::vector<DecisionTrace> traces;
  traces.reserve(corpus.dialogs.size());
  for (const auto& dialog : corpus.dialogs) {
    traces.push_back(run_incremental(ensemble, heads, dialog, d));
  }
  return evaluate_traces(ensemble, traces, corpus, d, split);
}

int take_index_for(const DecisionTurn& turn, double d) {
  if (turn.n_tokens < 1) return 0;
  for (std::size_t k = 0; k < turn.p_take.size(); ++k) {
    if (decide(turn.p_take[k], d)) return static_cast<int>(k) + 1;
  }
  return turn.n_tokens;
}

std::vector<CurveRow> prefix_accuracy_curve(const TrackerEnsemble& ensemble,
                                            const Corpus& corpus,
                                            const std::vector<double>& grid) {
  if (grid.empty()) throw ValueError("empty ratio grid");
  for (double r : grid) {
    if (!(r > 0.0 && r <= 1.0)) throw ValueError("ratio must lie in (0, 1]");
  }
  std::vector<CurveRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) rows[g].ratio = grid[g];

  std::vector<std::array<std::size_t, 3>> correct(grid.size(), {0, 0, 0});
  std::size_t turns = 0;
  for (const auto& dialog : corpus.dialogs) {
    auto tracked = track_dialog(ensemble, dialog);
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const auto& turn = tracked.turns[t];
      const auto& gold = dialog.turns[t].gold;
      ++turns;
      // Hypotheses per token, extracted once and shared across the grid.
      std::vector<TurnHypothesis> at_token;
      at_token.reserve(turn.steps.size());
      for (const auto& step : turn.steps) {
        at_token.push_back(extract_hypothesis(ensemble, step));
      }
      TurnHypothesis fallback;
      if (turn.steps.empty()) fallback = extract_hypothesis(ensemble, turn.final);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto& hyp =
            turn.steps.empty()
                ? fallback
                : at_token[static_cast<std::size_t>(deterministic_take_index(
                               static_cast<int>(turn.steps.size()), grid[g])) -
                           1];
        if (macro_correct(hyp, gold, Macro::kGoal)) ++correct[g][0];
        if (macro_correct(hyp, gold, Macro::kMethod)) ++correct[g][1];
        if (macro_correct(hyp, gold, Macro::kRequested)) ++correct[g][2];
      }
    }
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (turns > 0) {
      rows[g].goal_acc = static_cast<double>(correct[g][0]) / static_cast<double>(turns);
      rows[g].method_acc =
          static_cast<double>(correct[g][1]) / static_cast<double>(turns);
      rows[g].requested_acc =
          static_cast<double>(correct[g][2]) / static_cast<double>(turns);
    }
  }
  return rows;
}

void save_curve_csv(const std::vector<CurveRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open output file: " + path);
  out << "ratio,goal_acc,method_acc,requested_acc\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f,%.6f\n", row.ratio, row.goal_acc,
                  row.method_acc, row.requested_acc);
    out << buf;
  }
}

std::vector<HistogramCell> take_histogram(const std::vector<DecisionTrace>& traces) {
  std::map<std::pair<int, int>, std::size_t> counts;
  for (const auto& trace : traces) {
    for (const auto& turn : trace.turns) {
      if (turn.n_tokens < 1) continue;
      ++counts[{turn.n_tokens, turn.take_index}];
    }
  }
  std::vector<HistogramCell> cells;
  cells.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    cells.push_back({key.first, key.second, count});
  }
  return cells;
}

void save_histogram_csv(const std::vector<HistogramCell>& cells,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open output file: " + path);
  out << "# take-point histogram; raw counts (clipping is a plotting choice)\n";
  out << "length,ratio,count\n";
  char buf[96];
  for (const auto& cell : cells) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%zu\n", cell.length,
                  static_cast<double>(cell.take_index) /
                      static_cast<double>(cell.length),
                  cell.count);
    out << buf;
  }
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// One metric cell with its winner mark; `higher_wins` flips for L2.
void append_cells(std::string& line, double a, double b, bool higher_wins) {
  bool a_wins = higher_wins ? a >= b : a <= b;
  bool b_wins = higher_wins ? b >= a : b <= a;
  line += fmt3(a) + (a_wins ? "*" : " ") + "   ";
  line += fmt3(b) + (b_wins ? "*" : " ");
}

}  // namespace

std::string CompareReport::to_text() const {
  std::string out;
  out += "split: " + fixed.split + "\n";
  out += "turns scored: " + std::to_string(fixed.turns) + "\n";
  out += "\n";
  out += "metric            " + fixed.decider;
  out.append(fixed.decider.size() < 12 ? 12 - fixed.decider.size() : 1, ' ');
  out += learned.decider + "\n";
  auto row = [&](const std::string& label, double a, double b, bool higher_wins) {
    std::string line = label;
    line.append(label.size() < 18 ? 18 - label.size() : 1, ' ');
    append_cells(line, a, b, higher_wins);
    out += line + "\n";
  };
  row("realized ratio", fixed.realized_ratio, learned.realized_ratio, true);
  row("Goal Acc", fixed.goal.accuracy, learned.goal.accuracy, true);
  row("Goal L2", fixed.goal.l2, learned.goal.l2, false);
  row("Method Acc", fixed.method.accuracy, learned.method.accuracy, true);
  row("Method L2", fixed.method.l2, learned.method.l2, false);
  row("Requested Acc", fixed.requested.accuracy, learned.requested.accuracy, true);
  row("Requested L2", fixed.requested.l2, learned.requested.l2, false);
  out += "\n* better cell (higher accuracy, lower L2); realized ratio marks the"
         " later take point\n";
  return out;
}

CompareReport compare_report(const TrackerEnsemble& ensemble,
                             const std::vector<TTDHead>& heads, const Corpus& corpus,
                             double r, double d, const std::string& split) {
  CompareReport report;
  report.fixed = evaluate_deterministic(ensemble, corpus, r, split);
  report.learned = evaluate_incremental(ensemble, heads, corpus, d, split);
  return report;
}

SweepResult sweep_threshold(const TrackerEnsemble& ensemble,
                            const std::vector<TTDHead>& heads, const Corpus& corpus,
                            double target_ratio, const std::vector<double>& grid) {
  if (grid.empty()) throw ValueError("empty threshold grid");
  // One pass with an unreachable threshold records every turn's full
  // probability trace; each grid value is then re-derived from the traces.
  std::vector<DecisionTrace> traces;
  traces.reserve(corpus.dialogs.size());
  for (const auto& dialog : corpus.dialogs) {
    traces.push_back(run_incremental(ensemble, heads, dialog, 2.0));
  }
  SweepResult result;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double d : grid) {
    std::vector<int> indices, lengths;
    for (const auto& trace : traces) {
      for (const auto& turn : trace.turns) {
        if (turn.n_tokens < 1) continue;
        indices.push_back(take_index_for(turn, d));
        lengths.push_back(turn.n_tokens);
      }
    }
    SweepPoint point;
    point.d = d;
    point.realized = realized_ratio(indices, lengths);
    result.points.push_back(point);
    double gap = std::abs(point.realized - target_ratio);
    if (gap < best_gap) {
      best_gap = gap;
      result.best_d = d;
    }
  }
  return result;
}

}  // namespace itrack
