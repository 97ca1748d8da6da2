#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recapdet/config.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/model.hpp"

namespace recapdet {

// Parameter checkpoint: a version tag, the run config (verbatim + its hash)
// and named float32 entries. Byte layout documented in src/checkpoint.cpp.
struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::string config_json;
  std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------

template <typename S>
Checkpoint checkpoint_from_model(DetectorModel<S>& model, const RunConfig& cfg) {
  Checkpoint ckpt;
  ckpt.config_json = cfg.to_json();
  ckpt.config_hash = cfg.hash();
  for (auto& [name, t] : model.named_params()) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape();
    e.values.reserve(static_cast<std::size_t>(t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i)
      e.values.push_back(static_cast<float>(t.data()[i]));
    ckpt.entries.push_back(std::move(e));
  }
  for (auto& [name, buf] : model.named_buffers()) {
    CheckpointEntry e;
    e.name = name;
    e.shape = {static_cast<int>(buf->size())};
    e.values.reserve(static_cast<std::size_t>(buf->size()));
    for (std::int64_t i = 0; i < buf->size(); ++i)
      e.values.push_back(static_cast<float>((*buf)[i]));
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

template <typename S>
void load_model_from_checkpoint(DetectorModel<S>& model, const Checkpoint& ckpt) {
  auto find = [&ckpt](const std::string& name) -> const CheckpointEntry& {
    for (const auto& e : ckpt.entries)
      if (e.name == name) return e;
    throw IoError("checkpoint: missing entry " + name);
  };
  for (auto& [name, t] : model.named_params()) {
    const CheckpointEntry& e = find(name);
    if (e.shape != t.shape())
      throw IoError("checkpoint: entry " + name + " has shape " + shape_str(e.shape) +
                    ", model expects " + shape_str(t.shape()));
    for (std::int64_t i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<S>(e.values[static_cast<std::size_t>(i)]);
  }
  for (auto& [name, buf] : model.named_buffers()) {
    const CheckpointEntry& e = find(name);
    if (static_cast<std::int64_t>(e.values.size()) != buf->size())
      throw IoError("checkpoint: buffer " + name + " size mismatch");
    for (std::int64_t i = 0; i < buf->size(); ++i)
      (*buf)[i] = static_cast<S>(e.values[static_cast<std::size_t>(i)]);
  }
}

}  // namespace recapdet
