#pragma once

// Checkpoint container:
//
//   "AGCK"  u32 version (1)  u32 entry count
//   per entry: u16 name length, UTF-8 name, u8 dtype, u8 rank, u32 dims[rank],
//              little-endian payload
//
// dtype 0 is float32. The leading "__manifest__" entry holds UTF-8 JSON
// with dtype 2, rank 1, dims = byte length. After it come the model
// parameters (G.* then D.*), the batch-norm running statistics, and when
// saved from a trainer the ADAM moments as "adam.G.m.<param>" etc.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agct/adam.hpp"
#include "agct/gan/config.hpp"
#include "agct/gan/models.hpp"
#include "agct/gan/trainer.hpp"
#include "agct/io/binary.hpp"
#include "json.hpp"

namespace agct::io {

inline constexpr std::array<std::uint8_t, 4> kCheckpointMagic{'A', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::uint8_t kDtypeUtf8 = 2;
inline constexpr const char* kManifestName = "__manifest__";
inline constexpr std::size_t kMaxRank = 8;

struct CheckpointEntry {
  std::string name;
  std::uint8_t dtype = kDtypeF32;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;  // float32 entries
  std::string text;           // utf8 entries
};

struct Checkpoint {
  nlohmann::json manifest;
  std::vector<CheckpointEntry> entries;  // excluding the manifest, in file order

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ck.entries.size() + 1));
  auto put_name = [&](const std::string& name) {
    if (name.empty() || name.size() > 0xffff)
      fail(ErrorKind::invalid_argument, "checkpoint entry name length out of range");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
  };
  const std::string manifest = ck.manifest.dump();
  put_name(kManifestName);
  w.u8(kDtypeUtf8);
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(manifest.size()));
  w.text(manifest);
  for (const auto& e : ck.entries) {
    if (e.dtype != kDtypeF32)
      fail(ErrorKind::invalid_argument, "only float32 tensors are stored besides the manifest");
    std::size_t n = 1;
    for (auto d : e.dims) n *= d;
    if (n != e.values.size() || e.dims.size() > kMaxRank)
      fail(ErrorKind::shape_mismatch, "checkpoint entry '" + e.name + "' dims do not match values");
    put_name(e.name);
    w.u8(e.dtype);
    w.u8(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.u32(d);
    w.f32_array(e.values);
  }
  return w.take();
}

/// Parses and validates the container. Distinct error kinds: bad_magic,
/// unknown_version, bad_toc (entry headers, names, trailing bytes), and
/// blob_length_mismatch (payload shorter than its dims say).
inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::bad_toc);
  if (bytes.size() < 4 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    fail(ErrorKind::bad_magic, "bad magic: not an AGCK checkpoint");
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::unknown_version, "unknown checkpoint version " + std::to_string(version) +
                                         " (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t count = r.u32();
  if (count == 0) fail(ErrorKind::bad_toc, "corrupt table of contents: no manifest entry");
  Checkpoint ck;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    if (len == 0) fail(ErrorKind::bad_toc, "corrupt table of contents: empty entry name");
    CheckpointEntry e;
    e.name = r.text(len);
    if (!seen.insert(e.name).second)
      fail(ErrorKind::bad_toc, "corrupt table of contents: duplicate entry '" + e.name + "'");
    if ((i == 0) != (e.name == kManifestName))
      fail(ErrorKind::bad_toc, "corrupt table of contents: manifest must be the first entry");
    e.dtype = r.u8();
    const std::uint8_t rank = r.u8();
    if (rank > kMaxRank || (e.dtype != kDtypeF32 && e.dtype != kDtypeUtf8) ||
        (e.dtype == kDtypeUtf8) != (i == 0) || (e.dtype == kDtypeUtf8 && rank != 1))
      fail(ErrorKind::bad_toc, "corrupt table of contents at entry '" + e.name + "'");
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.u32());
      n *= e.dims.back();
      if (n > bytes.size())
        fail(ErrorKind::blob_length_mismatch,
             "blob length mismatch: entry '" + e.name + "' is larger than the file");
    }
    const std::uint64_t payload = e.dtype == kDtypeF32 ? 4 * n : n;
    if (payload > r.remaining())
      fail(ErrorKind::blob_length_mismatch,
           "blob length mismatch: entry '" + e.name + "' needs " + std::to_string(payload) +
               " bytes, " + std::to_string(r.remaining()) + " left");
    if (e.dtype == kDtypeF32) {
      r.f32_array(static_cast<std::size_t>(n), e.values);
      ck.entries.push_back(std::move(e));
    } else {
      try {
        ck.manifest = nlohmann::json::parse(r.text(static_cast<std::size_t>(n)));
      } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::bad_toc, std::string("corrupt manifest: ") + ex.what());
      }
    }
  }
  if (r.remaining() != 0)
    fail(ErrorKind::bad_toc, "corrupt table of contents: " + std::to_string(r.remaining()) +
                                 " trailing bytes");
  return ck;
}

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

namespace internal {

inline CheckpointEntry tensor_entry(const std::string& name, const Shape& shape,
                                    std::span<const float> v) {
  CheckpointEntry e;
  e.name = name;
  for (auto d : shape) e.dims.push_back(static_cast<std::uint32_t>(d));
  e.values.assign(v.begin(), v.end());
  return e;
}

inline const CheckpointEntry& require(const Checkpoint& ck, const std::string& name,
                                      std::size_t numel) {
  const CheckpointEntry* e = ck.find(name);
  if (!e) fail(ErrorKind::missing_parameter, "checkpoint has no entry '" + name + "'");
  if (e->values.size() != numel)
    fail(ErrorKind::shape_mismatch, "checkpoint entry '" + name + "' has " +
                                        std::to_string(e->values.size()) + " values, expected " +
                                        std::to_string(numel));
  return *e;
}

inline void put_moments(Checkpoint& ck, const std::string& prefix, const AdamState<float>& s,
                        const ParameterSet<float>& params) {
  for (const auto& p : params) {
    const auto it = s.moments.find(p.name);
    if (it == s.moments.end()) continue;
    ck.entries.push_back(tensor_entry(prefix + ".m." + p.name, p.tensor.shape(), it->second.first));
    ck.entries.push_back(tensor_entry(prefix + ".v." + p.name, p.tensor.shape(), it->second.second));
  }
}

inline void get_moments(const Checkpoint& ck, const std::string& prefix, AdamState<float>& s,
                        const ParameterSet<float>& params) {
  for (const auto& p : params) {
    const CheckpointEntry* m = ck.find(prefix + ".m." + p.name);
    const CheckpointEntry* v = ck.find(prefix + ".v." + p.name);
    if (!m && !v) continue;
    const auto& mm = require(ck, prefix + ".m." + p.name, p.tensor.numel());
    const auto& vv = require(ck, prefix + ".v." + p.name, p.tensor.numel());
    s.moments[p.name] = {mm.values, vv.values};
  }
}

}  // namespace internal

inline nlohmann::json train_config_json(const gan::TrainConfig& c) {
  const AdamHyper h = c.adam();
  return {{"epochs", c.epochs},           {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},   {"lambda", c.lambda},
          {"seed", c.seed},               {"checkpoint_every", c.checkpoint_every},
          {"beta1", h.beta1},             {"beta2", h.beta2},
          {"epsilon", h.epsilon}};
}

inline gan::TrainConfig train_config_from_json(const nlohmann::json& j, gan::ModelKind kind) {
  gan::TrainConfig c;
  c.kind = kind;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  return c;
}

/// Checkpoint of the models alone (no optimizer state).
inline Checkpoint make_checkpoint(const gan::Models<float>& models, const gan::TrainConfig& train,
                                  std::size_t epochs_completed) {
  Checkpoint ck;
  ck.manifest = {{"format_version", kCheckpointVersion},
                 {"model_kind", std::string(gan::to_string(models.config.kind))},
                 {"model", gan::to_json(models.config)},
                 {"train", train_config_json(train)},
                 {"epoch", epochs_completed},
                 {"seed", train.seed}};
  for (const auto& p : models.parameters())
    ck.entries.push_back(internal::tensor_entry(p.name, p.tensor.shape(), p.tensor.values()));
  for (const auto& b : const_cast<gan::Models<float>&>(models).buffers())
    ck.entries.push_back(internal::tensor_entry(b.name, {b.data->size()}, *b.data));
  return ck;
}

inline Checkpoint make_checkpoint(const gan::Trainer<float>& trainer) {
  const auto& models = trainer.models();
  Checkpoint ck = make_checkpoint(models, trainer.config(), trainer.epochs_completed());
  ck.manifest["optimizer"] = {{"generator_step", trainer.generator_optimizer().step},
                              {"discriminator_step", trainer.discriminator_optimizer().step}};
  internal::put_moments(ck, "adam.G", trainer.generator_optimizer(), models.generator.parameters());
  if (models.discriminator)
    internal::put_moments(ck, "adam.D", trainer.discriminator_optimizer(),
                          models.discriminator->parameters());
  return ck;
}

inline gan::ModelConfig checkpoint_model_config(const Checkpoint& ck) {
  try {
    if (ck.manifest.at("format_version").get<std::uint32_t>() != kCheckpointVersion)
      fail(ErrorKind::unknown_version, "unknown checkpoint manifest version");
    gan::ModelConfig cfg = gan::model_config_from_json(ck.manifest.at("model"));
    if (ck.manifest.at("model_kind").get<std::string>() != gan::to_string(cfg.kind))
      fail(ErrorKind::bad_toc, "manifest model kind disagrees with its architecture");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::bad_toc, std::string("corrupt manifest: ") + e.what());
  }
}

/// Rebuilds the models. Every architecture parameter and buffer must be
/// present exactly once, and nothing unknown may be left over.
inline gan::Models<float> restore_models(const Checkpoint& ck) {
  gan::Models<float> models = gan::build_models<float>(checkpoint_model_config(ck), 0);
  std::set<std::string> used;
  for (auto& p : models.parameters()) {
    const auto& e = internal::require(ck, p.name, p.tensor.numel());
    bool rank_ok = e.dims.size() == p.tensor.rank();
    for (std::size_t i = 0; rank_ok && i < e.dims.size(); ++i) rank_ok = e.dims[i] == p.tensor.dim(i);
    if (!rank_ok) fail(ErrorKind::shape_mismatch, "checkpoint entry '" + p.name + "' has wrong shape");
    std::copy(e.values.begin(), e.values.end(), p.tensor.mutable_values().begin());
    used.insert(p.name);
  }
  for (auto& b : models.buffers()) {
    const auto& e = internal::require(ck, b.name, b.data->size());
    *b.data = e.values;
    used.insert(b.name);
  }
  for (const auto& e : ck.entries)
    if (!used.count(e.name) && e.name.rfind("adam.", 0) != 0)
      fail(ErrorKind::bad_toc, "checkpoint has unexpected entry '" + e.name + "'");
  models.set_training(false);
  return models;
}

/// Rebuilds a trainer with its optimizer state, ready to resume. `epochs`
/// overrides the stored target epoch count when given.
inline gan::Trainer<float> restore_trainer(const Checkpoint& ck,
                                           std::optional<std::size_t> epochs = {}) {
  gan::Models<float> models = restore_models(ck);
  gan::TrainConfig tc;
  try {
    tc = train_config_from_json(ck.manifest.at("train"), models.config.kind);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::bad_toc, std::string("corrupt manifest: ") + e.what());
  }
  if (epochs) tc.epochs = *epochs;
  gan::Trainer<float> trainer(std::move(models), tc);
  trainer.set_epochs_completed(ck.manifest.value("epoch", std::size_t{0}));
  if (ck.manifest.contains("optimizer")) {
    trainer.generator_optimizer().step = ck.manifest["optimizer"].value("generator_step", std::uint64_t{0});
    trainer.discriminator_optimizer().step =
        ck.manifest["optimizer"].value("discriminator_step", std::uint64_t{0});
  }
  internal::get_moments(ck, "adam.G", trainer.generator_optimizer(),
                        trainer.models().generator.parameters());
  if (trainer.models().discriminator)
    internal::get_moments(ck, "adam.D", trainer.discriminator_optimizer(),
                          trainer.models().discriminator->parameters());
  return trainer;
}

}  // namespace agct::io
