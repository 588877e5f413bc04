// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "itrack/errors.hpp"
#include "itrack/rng.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

namespace {

using ordered_json = nlohmann::ordered_json;

// Per-token loss and its gradient w.r.t. the head logits.
nn::ScalarLoss token_loss(const TrackerModel& model, const Vector& logits,
                          const TurnAnnotation& gold) {
  if (model.spec.kind == ComponentKind::kCategorical) {
    return nn::nll_loss(nn::log_softmax(logits), gold_value_index(model.spec, gold));
  }
  return nn::bce_multilabel_loss_logits_grad(nn::sigmoid(logits),
                                             gold_requested_targets(model.spec, gold));
}

struct StepRecord {
  EncodeCache cache;
  bool scored = false;
  Vector h;        // hidden vector at this step (scored steps only)
  Vector dlogits;  // loss gradient w.r.t. head logits (scored steps only)
};

// Gold value string for a categorical component, by spec name.
const std::string& gold_value_string(const ComponentSpec& spec, const TurnAnnotation& gold) {
  for (std::size_t s = 0; s < kGoalSlotNames.size(); ++s) {
    if (spec.name == kGoalSlotNames[s]) return gold.goal.slot(s);
  }
  if (spec.name == "method") return gold.method;
  throw ValueError("no gold value accessor for component '" + spec.name + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValueError("epochs must be >= 1");
  if (patience < 0) throw ValueError("patience must be >= 0");
  optimizer.validate();
}

TurnLossResult turn_loss(const TrackerModel& model, const EncoderState& state,
                         const Turn& turn, const TurnAnnotation& gold) {
  TurnLossResult out;
  out.state = state;
  for (const auto& tok : turn.system_tokens) {
    out.state = encode_step(model, out.state, resolve_token_id(model, tok), tok.confidence);
  }
  for (const auto& tok : turn.user_tokens) {
    out.state = encode_step(model, out.state, resolve_token_id(model, tok), tok.confidence);
    out.loss += token_loss(model, model.head.forward(out.state.h), gold).loss;
  }
  return out;
}

double dialog_loss(const TrackerModel& model, const Dialog& dialog) {
  double total = 0.0;
  EncoderState state = init_state(model);
  for (const auto& turn : dialog.turns) {
    auto r = turn_loss(model, state, turn, turn.gold);
    total += r.loss;
    state = std::move(r.state);
  }
  return total;
}

double dialog_loss_backward(TrackerModel& model, const Dialog& dialog) {
  std::vector<StepRecord> steps;
  EncoderState state = init_state(model);
  double total = 0.0;

  for (const auto& turn : dialog.turns) {
    for (const auto& tok : turn.system_tokens) {
      StepRecord rec;
      state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence,
                          &rec.cache);
      steps.push_back(std::move(rec));
    }
    for (const auto& tok : turn.user_tokens) {
      StepRecord rec;
      state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence,
                          &rec.cache);
      rec.scored = true;
      rec.h = state.h;
      auto scored = token_loss(model, model.head.forward(state.h), turn.gold);
      total += scored.loss;
      rec.dlogits = std::move(scored.grad);
      steps.push_back(std::move(rec));
    }
  }

  // Reverse pass through the whole dialog.
  Vector dc(model.config.hidden_size, 0.0);
  Vector dh(model.config.hidden_size, 0.0);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->scored) {
      Vector dh_head = model.head.backward_acc(it->h, it->dlogits);
      for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh_head[i];
    }
    auto back = encode_backward(model, it->cache, dc, dh);
    dc = std::move(back.dc_prev);
    dh = std::move(back.dh_prev);
  }
  return total;
}

double component_turn_accuracy(const TrackerModel& model, const Corpus& corpus) {
  std::size_t turns = 0;
  std::size_t correct = 0;
  for (const auto& dialog : corpus.dialogs) {
    EncoderState state = init_state(model);
    for (const auto& turn : dialog.turns) {
      for (const auto& tok : turn.system_tokens) {
        state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence);
      }
      for (const auto& tok : turn.user_tokens) {
        state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence);
      }
      auto dist = classify(model, state.h);
      ++turns;
      // Gold values outside the model's value set count as misses (the model
      // cannot emit them), so dev corpora may contain values the training
      // split never saw.
      if (model.spec.kind == ComponentKind::kCategorical) {
        if (model.spec.values[dist.argmax()] == gold_value_string(model.spec, turn.gold)) {
          ++correct;
        }
      } else {
        std::vector<double> targets(model.spec.values.size(), 0.0);
        bool representable = true;
        for (const auto& slot : turn.gold.requested) {
          if (auto idx = model.spec.index_of(slot)) {
            targets[*idx] = 1.0;
          } else {
            representable = false;
          }
        }
        bool match = representable;
        for (std::size_t s = 0; s < targets.size() && match; ++s) {
          if ((dist.probs[s] > 0.5) != (targets[s] == 1.0)) match = false;
        }
        if (match) ++correct;
      }
    }
  }
  if (turns == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(turns);
}

TrainResult train_component(const Corpus& train, const Corpus& dev,
                            const ModelConfig& model_config, const ComponentSpec& spec,
                            const Vocabulary& vocab, const TrainConfig& config) {
  config.validate();
  if (train.dialogs.empty()) throw ValueError("training corpus is empty");

  TrainResult result;
  result.model = TrackerModel::create(model_config, spec, vocab,
                                      mix_seed(config.seed, fnv1a64(spec.name)));
  result.summary.component = spec.name;
  auto& model = result.model;

  Rng shuffle_rng(mix_seed(config.seed, fnv1a64(spec.name + "/shuffle")));
  std::vector<std::size_t> order(train.dialogs.size());
  std::iota(order.begin(), order.end(), 0);

  // Snapshot of the best parameters seen so far (values only).
  std::vector<Matrix> best_values;
  double best_acc = -1.0;
  int best_epoch = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& dialog = train.dialogs[idx];
      double loss = dialog_loss_backward(model, dialog);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                              ", dialog '" + dialog.id + "' (" + spec.name + ")");
      }
      try {
        for (auto* p : model.parameters()) nn::amsgrad_step(*p, config.optimizer);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                              ", dialog '" + dialog.id + "' (" + spec.name + ")");
      }
      ++result.summary.optimizer_steps;
      epoch_loss += loss;
    }

    double dev_acc = component_turn_accuracy(model, dev);
    result.summary.history.push_back(EpochStats{
        epoch, epoch_loss / static_cast<double>(train.dialogs.size()), dev_acc});
    if (config.on_epoch) config.on_epoch(spec.name, result.summary.history.back());

    if (dev_acc > best_acc) {  // strict: ties keep the earlier epoch
      best_acc = dev_acc;
      best_epoch = epoch;
      since_best = 0;
      best_values.clear();
      for (const auto* p : model.parameters()) best_values.push_back(p->value);
    } else {
      ++since_best;
      if (config.patience > 0 && since_best >= config.patience) break;
    }
  }

  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  result.summary.best_epoch = best_epoch;
  result.summary.best_dev_accuracy = best_acc;
  return result;
}

EnsembleTrainResult train_ensemble(const Corpus& train, const Corpus& dev,
                                   const ModelConfig& model_config,
                                   const std::vector<ComponentSpec>& specs,
                                   const Vocabulary& vocab, const TrainConfig& config) {
  std::vector<TrackerModel> models;
  EnsembleTrainResult out;
  for (const auto& spec : specs) {
    auto r = train_component(train, dev, model_config, spec, vocab, config);
    models.push_back(std::move(r.model));
    out.summaries.push_back(std::move(r.summary));
  }
  out.ensemble = TrackerEnsemble(std::move(models));
  return out;
}

std::string summaries_to_json(const std::vector<ComponentTrainSummary>& summaries) {
  ordered_json root = ordered_json::array();
  for (const auto& s : summaries) {
    ordered_json j;
    j["component"] = s.component;
    j["best_epoch"] = s.best_epoch;
    j["best_dev_accuracy"] = s.best_dev_accuracy;
    j["optimizer_steps"] = s.optimizer_steps;
    ordered_json hist = ordered_json::array();
    for (const auto& e : s.history) {
      ordered_json h;
      h["epoch"] = e.epoch;
      h["train_loss"] = e.train_loss;
      h["dev_accuracy"] = e.dev_accuracy;
      hist.push_back(std::move(h));
    }
    j["history"] = std::move(hist);
    root.push_back(std::move(j));
  }
  return root.dump(2);
}

}  // namespace itrack
