// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itrack/errors.hpp"
#include "itrack/rng.hpp"
#include "nlohmann/json.hpp"

namespace itrack {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

void append_le64(std::string& out, std::uint64_t bits) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t read_le64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return bits;
}

// Raw little-endian payload of the model's tensors in declared order.
std::string payload_bytes(const TrackerModel& model) {
  std::string out;
  std::size_t total = 0;
  for (const auto* p : model.parameters()) total += p->value.a.size();
  out.reserve(total * 8);
  for (const auto* p : model.parameters()) {
    for (double v : p->value.a) append_le64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

ordered_json config_to_json(const ModelConfig& cfg) {
  ordered_json j;
  j["num_embeddings"] = cfg.num_embeddings;
  j["embedding_dim"] = cfg.embedding_dim;
  j["emb_plus_out"] = cfg.emb_plus_out;
  j["hidden_size"] = cfg.hidden_size;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig cfg;
  cfg.num_embeddings = j.at("num_embeddings").get<std::size_t>();
  cfg.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  cfg.emb_plus_out = j.at("emb_plus_out").get<std::size_t>();
  cfg.hidden_size = j.at("hidden_size").get<std::size_t>();
  cfg.validate();
  return cfg;
}

}  // namespace

std::string tracker_fingerprint(const TrackerModel& model) {
  return hex64(fnv1a64(payload_bytes(model)));
}

std::string save_tracker(const TrackerModel& model, const std::string& path) {
  std::string payload = payload_bytes(model);
  std::string fingerprint = hex64(fnv1a64(payload));

  ordered_json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "tracker";
  header["config"] = config_to_json(model.config);
  ordered_json spec;
  spec["name"] = model.spec.name;
  spec["kind"] = to_string(model.spec.kind);
  spec["values"] = model.spec.values;
  header["spec"] = std::move(spec);
  header["vocabulary"] = model.vocab.tokens();
  ordered_json tensors = ordered_json::array();
  for (const auto* p : model.parameters()) {
    ordered_json t;
    t["name"] = p->name;
    t["rows"] = p->value.rows;
    t["cols"] = p->value.cols;
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);
  header["fingerprint"] = fingerprint;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ValueError("failed writing checkpoint: " + path);
  return fingerprint;
}

TrackerModel load_tracker(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError("checkpoint has no header", 1);
  ordered_json header;
  try {
    header = ordered_json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), 1);
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw ParseError("unsupported checkpoint format version", 1);
  }
  if (header.value("kind", "") != "tracker") {
    throw ParseError("checkpoint is not a tracker", 1);
  }

  ModelConfig cfg = config_from_json(header.at("config"));
  ComponentSpec spec;
  spec.name = header.at("spec").at("name").get<std::string>();
  spec.kind = component_kind_from_string(header.at("spec").at("kind").get<std::string>());
  spec.values = header.at("spec").at("values").get<std::vector<std::string>>();
  auto vocab = vocabulary_from_tokens(
      header.at("vocabulary").get<std::vector<std::string>>());

  auto model = TrackerModel::create(cfg, spec, vocab, 0);
  auto params = model.parameters();
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.size()) {
    throw ParseError("tensor directory does not match the model layout", 1);
  }

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i]->name ||
        t.at("rows").get<std::size_t>() != params[i]->value.rows ||
        t.at("cols").get<std::size_t>() != params[i]->value.cols) {
      throw ParseError("tensor '" + params[i]->name + "' has unexpected shape or order", 1);
    }
    std::size_t bytes = params[i]->value.a.size() * 8;
    if (offset + bytes > payload.size()) {
      throw ParseError("checkpoint payload truncated", 1);
    }
    for (auto& v : params[i]->value.a) {
      v = std::bit_cast<double>(read_le64(payload.data() + offset));
      offset += 8;
    }
  }
  if (offset != payload.size()) throw ParseError("checkpoint payload has trailing bytes", 1);

  auto fingerprint = header.at("fingerprint").get<std::string>();
  if (tracker_fingerprint(model) != fingerprint) {
    throw ValueError("checkpoint fingerprint mismatch (corrupt file?): " + path);
  }
  return model;
}

std::string ensemble_fingerprint(const TrackerEnsemble& ensemble) {
  std::string joined;
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    joined += tracker_fingerprint(ensemble.model(c));
  }
  return hex64(fnv1a64(joined));
}

std::string save_ensemble(const TrackerEnsemble& ensemble, const std::string& dir) {
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["kind"] = "ensemble";
  ordered_json components = ordered_json::array();
  std::string joined;
  for (std::size_t c = 0; c < ensemble.size(); ++c) {
    const auto& model = ensemble.model(c);
    std::string file = model.spec.name + ".ckpt";
    std::string fp = save_tracker(model, (std::filesystem::path(dir) / file).string());
    joined += fp;
    ordered_json entry;
    entry["component"] = model.spec.name;
    entry["file"] = file;
    entry["fingerprint"] = fp;
    components.push_back(std::move(entry));
  }
  manifest["components"] = std::move(components);
  std::string ensemble_fp = hex64(fnv1a64(joined));
  manifest["fingerprint"] = ensemble_fp;

  std::ofstream out(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw ValueError("cannot write ensemble manifest in " + dir);
  out << manifest.dump(2) << '\n';
  return ensemble_fp;
}

TrackerEnsemble load_ensemble(const std::string& dir) {
  auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    throw ValueError("no ensemble manifest at " + manifest_path.string() +
                     "; train a tracker first");
  }
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid ensemble manifest: ") + e.what(), 1);
  }
  if (manifest.value("kind", "") != "ensemble") {
    throw ParseError("manifest is not an ensemble manifest", 1);
  }
  std::vector<TrackerModel> models;
  std::string joined;
  for (const auto& entry : manifest.at("components")) {
    auto file = entry.at("file").get<std::string>();
    auto model = load_tracker((std::filesystem::path(dir) / file).string());
    auto fp = tracker_fingerprint(model);
    if (fp != entry.at("fingerprint").get<std::string>()) {
      throw ValueError("component checkpoint does not match the manifest: " + file);
    }
    if (model.spec.name != entry.at("component").get<std::string>()) {
      throw ValueError("component name mismatch in manifest entry: " + file);
    }
    joined += fp;
    models.push_back(std::move(model));
  }
  TrackerEnsemble ensemble(std::move(models));
  if (hex64(fnv1a64(joined)) != manifest.at("fingerprint").get<std::string>()) {
    throw ValueError("ensemble fingerprint mismatch in " + dir);
  }
  return ensemble;
}

namespace {

std::string ttd_payload_bytes(const std::vector<TTDHead>& heads) {
  std::string out;
  for (const auto& head : heads) {
    for (const auto* p : head.parameters()) {
      for (double v : p->value.a) append_le64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

}  // namespace

std::string save_ttd(const std::vector<TTDHead>& heads,
                     const std::string& ensemble_fingerprint, const std::string& path) {
  if (heads.empty()) throw ValueError("cannot save an empty decider");
  std::string payload = ttd_payload_bytes(heads);
  std::string fingerprint = hex64(fnv1a64(payload));

  ordered_json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = "ttd";
  header["ensemble_fingerprint"] = ensemble_fingerprint;
  header["hidden_size"] = heads.front().hidden_size();
  ordered_json components = ordered_json::array();
  for (const auto& head : heads) components.push_back(head.component);
  header["components"] = std::move(components);
  header["fingerprint"] = fingerprint;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValueError("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ValueError("failed writing checkpoint: " + path);
  return fingerprint;
}

TTDCheckpoint load_ttd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValueError("no decider checkpoint at " + path + "; train the decider first");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError("checkpoint has no header", 1);
  ordered_json header;
  try {
    header = ordered_json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), 1);
  }
  if (header.value("format_version", -1) != kFormatVersion) {
    throw ParseError("unsupported checkpoint format version", 1);
  }
  if (header.value("kind", "") != "ttd") {
    throw ParseError("checkpoint is not a decider", 1);
  }

  TTDCheckpoint ckpt;
  ckpt.ensemble_fingerprint = header.at("ensemble_fingerprint").get<std::string>();
  auto hidden = header.at("hidden_size").get<std::size_t>();
  auto names = header.at("components").get<std::vector<std::string>>();
  if (names.empty()) throw ParseError("decider checkpoint lists no components", 1);

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (payload.size() != names.size() * (hidden + 1) * 2 * 8) {
    throw ParseError("decider payload size does not match the header", 1);
  }
  std::size_t offset = 0;
  for (const auto& name : names) {
    auto head = TTDHead::create(name, hidden, 0);
    for (auto* p : head.parameters()) {
      for (auto& v : p->value.a) {
        v = std::bit_cast<double>(read_le64(payload.data() + offset));
        offset += 8;
      }
    }
    ckpt.heads.push_back(std::move(head));
  }
  if (hex64(fnv1a64(payload)) != header.at("fingerprint").get<std::string>()) {
    throw ValueError("checkpoint fingerprint mismatch (corrupt file?): " + path);
  }
  return ckpt;
}

}  // namespace itrack
