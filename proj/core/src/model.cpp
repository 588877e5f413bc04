// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/model.hpp"

#include <algorithm>
#include <cmath>

#include "itrack/errors.hpp"
#include "itrack/rng.hpp"

namespace itrack {

void ModelConfig::validate() const {
  if (num_embeddings < 1 || embedding_dim < 1 || emb_plus_out < 1 || hidden_size < 1) {
    throw ValueError("model dimensions must all be positive");
  }
}

std::size_t ComponentDistribution::argmax() const {
  if (probs.empty()) throw ValueError("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> ComponentDistribution::active_slots() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.5) out.push_back(i);
  }
  return out;
}

TrackerModel TrackerModel::create(const ModelConfig& config, const ComponentSpec& spec,
                                  const Vocabulary& vocab, std::uint64_t seed) {
  config.validate();
  spec.validate();
  if (vocab.size() > config.num_embeddings) {
    throw ValueError("vocabulary does not fit num_embeddings");
  }
  TrackerModel m;
  m.config = config;
  m.spec = spec;
  m.vocab = vocab;
  m.embedding = nn::Parameter("embedding", config.num_embeddings, config.embedding_dim);
  m.emb_plus = nn::Affine("emb_plus", config.emb_plus_out, config.embedding_dim + 1);
  m.lstm = nn::LstmCell(config.emb_plus_out, config.hidden_size);
  m.head = nn::Affine("head", spec.size(), config.hidden_size);

  Rng rng(seed);
  m.embedding.init_uniform(rng, config.embedding_dim);
  m.emb_plus.init(rng);
  m.lstm.init(rng);
  m.head.init(rng);
  return m;
}

std::vector<nn::Parameter*> TrackerModel::parameters() {
  std::vector<nn::Parameter*> out = {&embedding};
  for (auto* p : emb_plus.parameters()) out.push_back(p);
  for (auto* p : lstm.parameters()) out.push_back(p);
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> TrackerModel::parameters() const {
  auto mutable_params = const_cast<TrackerModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t TrackerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.a.size();
  return n;
}

void TrackerModel::zero_grads() {
  for (auto* p : parameters()) p->zero_grad();
}

EncoderState init_state(const TrackerModel& model) {
  return EncoderState{Vector(model.config.hidden_size, 0.0),
                      Vector(model.config.hidden_size, 0.0)};
}

EncoderState encode_step(const TrackerModel& model, const EncoderState& state, int token_id,
                         double confidence, EncodeCache* cache) {
  if (token_id < 0 || static_cast<std::size_t>(token_id) >= model.config.num_embeddings) {
    throw ValueError("unknown token id " + std::to_string(token_id) +
                     "; map tokens through the vocabulary first");
  }
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ValueError("confidence outside [0, 1]");
  }
  // x = [embedding row | confidence]
  Vector x(model.config.embedding_dim + 1);
  const double* row = &model.embedding.value.a[token_id * model.config.embedding_dim];
  std::copy(row, row + model.config.embedding_dim, x.begin());
  x.back() = confidence;

  Vector fused = model.emb_plus.forward(x);  // identity activation
  if (cache != nullptr) {
    cache->token_id = token_id;
    cache->x = x;
    return model.lstm.step(fused, state, &cache->lstm);
  }
  return model.lstm.step(fused, state);
}

EncodeBack encode_backward(TrackerModel& model, const EncodeCache& cache, const Vector& dc_next,
                           const Vector& dh_next) {
  auto lstm_back = model.lstm.backward(cache.lstm, dc_next, dh_next);
  Vector dx = model.emb_plus.backward_acc(cache.x, lstm_back.dx);
  // The embedding row receives the first embedding_dim entries; the final
  // entry is the confidence input, which has no parameters.
  double* grad_row = &model.embedding.grad.a[cache.token_id * model.config.embedding_dim];
  for (std::size_t i = 0; i < model.config.embedding_dim; ++i) grad_row[i] += dx[i];
  return EncodeBack{std::move(lstm_back.dc_prev), std::move(lstm_back.dh_prev)};
}

ComponentDistribution classify(const TrackerModel& model, const Vector& h) {
  if (h.size() != model.config.hidden_size) {
    throw ShapeError("hidden vector has wrong length");
  }
  Vector logits = model.head.forward(h);
  ComponentDistribution dist;
  dist.kind = model.spec.kind;
  if (model.spec.kind == ComponentKind::kCategorical) {
    dist.log_probs = nn::log_softmax(logits);
    dist.probs.resize(dist.log_probs.size());
    for (std::size_t i = 0; i < dist.log_probs.size(); ++i) {
      dist.probs[i] = std::exp(dist.log_probs[i]);
    }
  } else {
    dist.probs = nn::sigmoid(logits);
  }
  return dist;
}

int resolve_token_id(const TrackerModel& model, const TokenObs& tok) {
  if (tok.token_id >= 0) return tok.token_id;
  return model.vocab.lookup(tok.surface);
}

ComponentTrack track_dialog_component(const TrackerModel& model, const Dialog& dialog) {
  ComponentTrack track;
  EncoderState state = init_state(model);
  for (const auto& turn : dialog.turns) {
    ComponentTrack::Turn out;
    for (const auto& tok : turn.system_tokens) {
      state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence);
    }
    for (const auto& tok : turn.user_tokens) {
      state = encode_step(model, state, resolve_token_id(model, tok), tok.confidence);
      out.steps.push_back(ComponentTrack::Step{classify(model, state.h), state.h});
    }
    // Zero-decision turn: fall back to the post-system state.
    out.final = out.steps.empty() ? ComponentTrack::Step{classify(model, state.h), state.h}
                                  : out.steps.back();
    track.turns.push_back(std::move(out));
  }
  return track;
}

TrackerEnsemble::TrackerEnsemble(std::vector<TrackerModel> models)
    : models_(std::move(models)) {
  if (models_.empty()) throw ValueError("ensemble needs at least one component");
}

TrackerEnsemble TrackerEnsemble::create(const ModelConfig& config,
                                        const std::vector<ComponentSpec>& specs,
                                        const Vocabulary& vocab, std::uint64_t seed) {
  std::vector<TrackerModel> models;
  models.reserve(specs.size());
  for (const auto& spec : specs) {
    models.push_back(
        TrackerModel::create(config, spec, vocab, mix_seed(seed, fnv1a64(spec.name))));
  }
  return TrackerEnsemble(std::move(models));
}

TrackerModel* TrackerEnsemble::find(std::string_view name) {
  for (auto& m : models_) {
    if (m.spec.name == name) return &m;
  }
  return nullptr;
}

const TrackerModel* TrackerEnsemble::find(std::string_view name) const {
  return const_cast<TrackerEnsemble*>(this)->find(name);
}

std::vector<std::string> TrackerEnsemble::component_names() const {
  std::vector<std::string> names;
  names.reserve(models_.size());
  for (const auto& m : models_) names.push_back(m.spec.name);
  return names;
}

TrackedDialog track_dialog(const TrackerEnsemble& ensemble, const Dialog& dialog) {
  std::vector<ComponentTrack> tracks;
  tracks.reserve(ensemble.size());
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    tracks.push_back(track_dialog_component(ensemble.model(c), dialog));
  }
  TrackedDialog out;
  out.turns.resize(dialog.turns.size());
  for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
    auto& turn = out.turns[t];
    std::size_t n_steps = tracks.empty() ? 0 : tracks[0].turns[t].steps.size();
    turn.steps.resize(n_steps);
    for (std::size_t c = 0; c < ensemble.size(); ++c) {
      auto& ct = tracks[c].turns[t];
      for (std::size_t i = 0; i < n_steps; ++i) {
        turn.steps[i].dists.push_back(std::move(ct.steps[i].dist));
        turn.steps[i].h.push_back(std::move(ct.steps[i].h));
      }
      turn.final.dists.push_back(std::move(ct.final.dist));
      turn.final.h.push_back(std::move(ct.final.h));
    }
  }
  return out;
}

}  // namespace itrack
