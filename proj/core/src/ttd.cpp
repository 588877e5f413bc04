// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/ttd.hpp"

#include <cmath>
#include <fstream>

#include "itrack/checkpoint.hpp"
#include "itrack/errors.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

using ordered_json = nlohmann::ordered_json;

TTDHead TTDHead::create(const std::string& component, std::size_t hidden_size,
                        std::uint64_t seed) {
  TTDHead head;
  head.component = component;
  head.affine = nn::Affine("ttd", 2, hidden_size);
  Rng rng(mix_seed(seed, fnv1a64(component + "/ttd")));
  head.affine.init(rng);
  return head;
}

void TTDHead::zero_grads() {
  for (auto* p : parameters()) p->zero_grad();
}

TakeProbability ttd_forward(const TTDHead& head, const Vector& h) {
  auto log_probs = nn::log_softmax(head.affine.forward(h));
  return {std::exp(log_probs[0]), std::exp(log_probs[1])};
}

void TTDTrainConfig::validate() const {
  if (epochs < 1) throw ValueError("epochs must be at least 1");
  optimizer.validate();
}

namespace {

// Consecutive records sharing a dialog_id form one update group.
std::vector<std::pair<std::size_t, std::size_t>> dialog_groups(
    const std::vector<TokenLabelRecord>& records) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= records.size(); ++i) {
    if (i == records.size() || records[i].dialog_id != records[begin].dialog_id) {
      groups.emplace_back(begin, i);
      begin = i;
    }
  }
  return groups;
}

void check_dataset(const RelabelDataset& dataset, const TrackerEnsemble& ensemble) {
  if (dataset.fingerprint != ensemble_fingerprint(ensemble)) {
    throw ConfigError(
        "relabeled dataset fingerprint " + dataset.fingerprint +
        " does not match the ensemble; re-run relabeling against this checkpoint");
  }
  if (dataset.components != ensemble.component_names()) {
    throw ConfigError("relabeled dataset component order does not match the ensemble");
  }
  if (dataset.records.empty()) throw ValueError("relabeled dataset is empty");
  auto hidden = ensemble.model(0).config.hidden_size;
  for (const auto& rec : dataset.records) {
    if (rec.h.size() != dataset.components.size()) {
      throw ConfigError(
          "relabeled dataset lacks hidden vectors; relabel in process before "
          "training the decider");
    }
    for (const auto& v : rec.h) {
      if (v.size() != hidden) {
        throw ConfigError("relabeled dataset hidden vectors do not match the "
                          "ensemble hidden size");
      }
    }
  }
}

}  // namespace

TTDTrainResult train_ttd(const RelabelDataset& dataset, const TrackerEnsemble& ensemble,
                         const TTDTrainConfig& config) {
  config.validate();
  check_dataset(dataset, ensemble);
  auto groups = dialog_groups(dataset.records);
  auto hidden = ensemble.model(0).config.hidden_size;

  TTDTrainResult result;
  for (std::size_t c = 0; c < dataset.components.size(); ++c) {
    const auto& name = dataset.components[c];
    auto head = TTDHead::create(name, hidden, config.seed);
    Rng shuffle_rng(mix_seed(config.seed, fnv1a64(name + "/ttd/shuffle")));

    // Inverse-frequency class weights; identity unless reweighting is on.
    double weight[2] = {1.0, 1.0};
    if (config.reweight_classes) {
      std::size_t count[2] = {0, 0};
      for (const auto& rec : dataset.records) ++count[rec.labels[c]];
      auto total = static_cast<double>(dataset.records.size());
      for (int k : {0, 1}) {
        if (count[k] > 0) weight[k] = total / (2.0 * static_cast<double>(count[k]));
      }
    }

    TTDTrainSummary summary;
    summary.component = name;
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      double epoch_loss = 0.0;
      for (auto gi : order) {
        auto [begin, end] = groups[gi];
        double group_loss = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& rec = dataset.records[i];
          auto log_probs = nn::log_softmax(head.affine.forward(rec.h[c]));
          auto nll = nn::nll_loss(log_probs, static_cast<std::size_t>(rec.labels[c]));
          double w = weight[rec.labels[c]];
          group_loss += w * nll.loss;
          for (auto& g : nll.grad) g *= w;
          head.affine.backward_acc(rec.h[c], nll.grad);
        }
        if (!std::isfinite(group_loss)) {
          throw DivergenceError("decider training diverged at epoch " +
                                std::to_string(epoch) + ", dialog '" +
                                dataset.records[groups[gi].first].dialog_id + "' (" +
                                name + ")");
        }
        try {
          for (auto* p : head.parameters()) nn::amsgrad_step(*p, config.optimizer);
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at epoch " +
                                std::to_string(epoch) + " (" + name + ")");
        }
        ++summary.optimizer_steps;
        epoch_loss += group_loss;
      }

      TTDEpochStats stats;
      stats.epoch = epoch;
      stats.train_loss = epoch_loss / static_cast<double>(dataset.records.size());
      std::size_t correct = 0;
      for (const auto& rec : dataset.records) {
        auto p = ttd_forward(head, rec.h[c]);
        int predicted = p.take >= p.wait ? 0 : 1;
        if (predicted == rec.labels[c]) ++correct;
      }
      stats.train_accuracy =
          static_cast<double>(correct) / static_cast<double>(dataset.records.size());
      summary.history.push_back(stats);
      if (config.on_epoch) config.on_epoch(name, stats);
    }

    result.heads.push_back(std::move(head));
    result.summaries.push_back(std::move(summary));
  }
  return result;
}

std::vector<double> ttd_token_accuracy(const std::vector<TTDHead>& heads,
                                       const RelabelDataset& dataset) {
  if (heads.size() != dataset.components.size()) {
    throw ConfigError("head count does not match dataset components");
  }
  std::vector<double> acc(heads.size(), 0.0);
  if (dataset.records.empty()) return acc;
  for (std::size_t c = 0; c < heads.size(); ++c) {
    std::size_t correct = 0;
    for (const auto& rec : dataset.records) {
      if (rec.h.size() != heads.size()) {
        throw ConfigError("dataset record lacks hidden vectors");
      }
      auto p = ttd_forward(heads[c], rec.h[c]);
      int predicted = p.take >= p.wait ? 0 : 1;
      if (predicted == rec.labels[c]) ++correct;
    }
    acc[c] = static_cast<double>(correct) / static_cast<double>(dataset.records.size());
  }
  return acc;
}

bool decide(const std::vector<double>& p_take, double d) {
  for (double p : p_take) {
    if (p < d) return false;
  }
  return true;
}

DecisionTrace run_incremental(const TrackerEnsemble& ensemble,
                              const std::vector<TTDHead>& heads, const Dialog& dialog,
                              double d) {
  auto n_comp = ensemble.size();
  if (heads.size() != n_comp) {
    throw ConfigError("decider head count does not match the ensemble");
  }
  DecisionTrace trace;
  trace.dialog_id = dialog.id;

  std::vector<EncoderState> states(n_comp);
  for (std::size_t c = 0; c < n_comp; ++c) states[c] = init_state(ensemble.model(c));

  for (const auto& turn : dialog.turns) {
    DecisionTurn out;
    out.n_tokens = static_cast<int>(turn.user_tokens.size());

    for (const auto& tok : turn.system_tokens) {
      for (std::size_t c = 0; c < n_comp; ++c) {
        const auto& model = ensemble.model(c);
        states[c] = encode_step(model, states[c], resolve_token_id(model, tok),
                                tok.confidence);
      }
    }

    // Post-system fallback for turns without user tokens.
    if (turn.user_tokens.empty()) {
      out.take_index = 0;
      out.forced = true;
      for (std::size_t c = 0; c < n_comp; ++c) {
        out.scored.dists.push_back(classify(ensemble.model(c), states[c].h));
        out.scored.h.push_back(states[c].h);
      }
      trace.turns.push_back(std::move(out));
      continue;
    }

    bool taken = false;
    TrackedStep last_step;
    std::vector<double> last_p;
    for (std::size_t k = 0; k < turn.user_tokens.size(); ++k) {
      const auto& tok = turn.user_tokens[k];
      TrackedStep step;
      std::vector<double> p_row(n_comp);
      for (std::size_t c = 0; c < n_comp; ++c) {
        const auto& model = ensemble.model(c);
        states[c] = encode_step(model, states[c], resolve_token_id(model, tok),
                                tok.confidence);
        step.dists.push_back(classify(model, states[c].h));
        step.h.push_back(states[c].h);
        p_row[c] = ttd_forward(heads[c], states[c].h).take;
      }
      out.p_take.push_back(p_row);
      if (!taken && decide(p_row, d)) {
        taken = true;
        out.take_index = static_cast<int>(k) + 1;
        out.scored = step;
        out.product_at_take = 1.0;
        for (double p : p_row) out.product_at_take *= p;
      }
      last_step = std::move(step);
      last_p = std::move(p_row);
    }
    if (!taken) {
      out.forced = true;
      out.take_index = out.n_tokens;
      out.scored = std::move(last_step);
      out.product_at_take = 1.0;
      for (double p : last_p) out.product_at_take *= p;
    }
    trace.turns.push_back(std::move(out));
  }
  return trace;
}

void save_traces(const std::vector<DecisionTrace>& traces,
                 const std::vector<std::string>& components, double d,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open output file: " + path);
  ordered_json header;
  header["format_version"] = 1;
  header["kind"] = "decision_traces";
  header["threshold"] = d;
  header["components"] = components;
  out << header.dump() << '\n';
  for (const auto& trace : traces) {
    for (std::size_t t = 0; t < trace.turns.size(); ++t) {
      const auto& turn = trace.turns[t];
      ordered_json j;
      j["dialog_id"] = trace.dialog_id;
      j["turn"] = t;
      j["n_tokens"] = turn.n_tokens;
      j["take_index"] = turn.take_index;
      j["forced"] = turn.forced;
      j["ratio"] = turn.n_tokens > 0 ? static_cast<double>(turn.take_index) /
                                           static_cast<double>(turn.n_tokens)
                                     : 0.0;
      ordered_json probs = ordered_json::object();
      if (turn.take_index >= 1) {
        const auto& row = turn.p_take[static_cast<std::size_t>(turn.take_index) - 1];
        for (std::size_t c = 0; c < components.size(); ++c) probs[components[c]] = row[c];
      }
      j["p_take"] = probs;
      j["p_take_product"] = turn.product_at_take;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace itrack
