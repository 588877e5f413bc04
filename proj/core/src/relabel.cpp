// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/relabel.hpp"

#include <fstream>

#include "itrack/checkpoint.hpp"
#include "itrack/errors.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

using ordered_json = nlohmann::ordered_json;

std::vector<std::size_t> hypothesis_key(const ComponentDistribution& dist) {
  if (dist.kind == ComponentKind::kCategorical) return {dist.argmax()};
  return dist.active_slots();
}

std::vector<int> labels_from_hypotheses(
    const std::vector<std::vector<std::size_t>>& keys) {
  std::vector<int> labels(keys.size(), 0);
  if (keys.empty()) return labels;
  const auto& last = keys.back();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    labels[i] = keys[i] == last ? 0 : 1;
  }
  return labels;
}

TurnRelabelResult relabel_turn(const TrackerModel& model, const EncoderState& state,
                               const Turn& turn) {
  TurnRelabelResult out;
  EncoderState s = state;
  for (const auto& tok : turn.system_tokens) {
    s = encode_step(model, s, resolve_token_id(model, tok), tok.confidence);
  }
  std::vector<std::vector<std::size_t>> keys;
  keys.reserve(turn.user_tokens.size());
  for (const auto& tok : turn.user_tokens) {
    s = encode_step(model, s, resolve_token_id(model, tok), tok.confidence);
    keys.push_back(hypothesis_key(classify(model, s.h)));
  }
  out.labels = labels_from_hypotheses(keys);
  out.state = s;
  return out;
}

namespace {

void check_corpus_fits(const TrackerEnsemble& ensemble, const Corpus& corpus) {
  auto limit = static_cast<std::int64_t>(ensemble.model(0).config.num_embeddings);
  for (const auto& d : corpus.dialogs) {
    for (const auto& t : d.turns) {
      for (const auto* stream : {&t.system_tokens, &t.user_tokens}) {
        for (const auto& tok : *stream) {
          if (tok.token_id >= limit) {
            throw ConfigError("corpus token id " + std::to_string(tok.token_id) +
                              " is outside the ensemble vocabulary (size " +
                              std::to_string(limit) +
                              "); the corpus was bound to a different vocabulary");
          }
        }
      }
    }
  }
}

}  // namespace

RelabelDataset relabel_corpus(const TrackerEnsemble& ensemble, const Corpus& corpus) {
  check_corpus_fits(ensemble, corpus);
  RelabelDataset ds;
  ds.fingerprint = ensemble_fingerprint(ensemble);
  ds.components = ensemble.component_names();
  for (const auto& dialog : corpus.dialogs) {
    auto tracked = track_dialog(ensemble, dialog);
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      const auto& steps = tracked.turns[t].steps;
      // Per-component label stream for this turn.
      std::vector<std::vector<int>> labels(ensemble.size());
      for (std::size_t c = 0; c < ensemble.size(); ++c) {
        std::vector<std::vector<std::size_t>> keys;
        keys.reserve(steps.size());
        for (const auto& step : steps) keys.push_back(hypothesis_key(step.dists[c]));
        labels[c] = labels_from_hypotheses(keys);
      }
      for (std::size_t k = 0; k < steps.size(); ++k) {
        TokenLabelRecord rec;
        rec.dialog_id = dialog.id;
        rec.turn = static_cast<int>(t);
        rec.token_index = static_cast<int>(k);
        rec.surface = dialog.turns[t].user_tokens[k].surface;
        rec.labels.resize(ensemble.size());
        rec.h.resize(ensemble.size());
        for (std::size_t c = 0; c < ensemble.size(); ++c) {
          rec.labels[c] = labels[c][k];
          rec.h[c] = steps[k].h[c];
        }
        ds.records.push_back(std::move(rec));
      }
    }
  }
  return ds;
}

void save_relabeled(const RelabelDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open output file: " + path);
  ordered_json header;
  header["format_version"] = 1;
  header["kind"] = "ttd_dataset";
  header["fingerprint"] = dataset.fingerprint;
  header["components"] = dataset.components;
  out << header.dump() << '\n';
  for (const auto& rec : dataset.records) {
    ordered_json j;
    j["dialog_id"] = rec.dialog_id;
    j["turn"] = rec.turn;
    j["token_index"] = rec.token_index;
    j["surface"] = rec.surface;
    ordered_json labels;
    for (std::size_t c = 0; c < dataset.components.size(); ++c) {
      labels[dataset.components[c]] = rec.labels.at(c);
    }
    j["labels"] = labels;
    out << j.dump() << '\n';
  }
}

RelabelDataset load_relabeled(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open relabeled dataset: " + path);
  RelabelDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON record: ") + e.what(), lineno);
    }
    try {
      if (lineno == 1) {
        if (j.value("kind", "") != "ttd_dataset") {
          throw ParseError("not a relabeled dataset header", lineno);
        }
        if (j.value("format_version", 0) != 1) {
          throw ParseError("unsupported dataset format version", lineno);
        }
        ds.fingerprint = j.at("fingerprint").get<std::string>();
        ds.components = j.at("components").get<std::vector<std::string>>();
        continue;
      }
      TokenLabelRecord rec;
      rec.dialog_id = j.at("dialog_id").get<std::string>();
      rec.turn = j.at("turn").get<int>();
      rec.token_index = j.at("token_index").get<int>();
      rec.surface = j.at("surface").get<std::string>();
      const auto& labels = j.at("labels");
      for (const auto& name : ds.components) {
        int v = labels.at(name).get<int>();
        if (v != 0 && v != 1) throw ParseError("label must be 0 or 1", lineno);
        rec.labels.push_back(v);
      }
      ds.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad dataset record: ") + e.what(), lineno);
    }
  }
  if (lineno == 0) throw ParseError("empty dataset file: " + path, 0);
  return ds;
}

}  // namespace itrack
