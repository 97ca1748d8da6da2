#include "recapdet/config.hpp"

#include <nlohmann/json.hpp>

#include "recapdet/errors.hpp"
#include "recapdet/image.hpp"
#include "recapdet/model.hpp"

namespace recapdet {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("run config: k must be >= 1, got " + std::to_string(k));
  if (lr <= 0) throw ConfigError("run config: lr must be positive");
  if (batch_size < 2) throw ConfigError("run config: batch size must be >= 2 (batch norm)");
  if (epochs < 1) throw ConfigError("run config: epochs must be >= 1");
  if (scales < 1 || scales > 3) throw ConfigError("run config: scales must be in {1,2,3}");
  if (precision != "f32" && precision != "f64")
    throw ConfigError("run config: precision must be f32 or f64");
  parse_variant(variant);
  if (input_side != backbone.input_side)
    throw ConfigError("run config: input_side " + std::to_string(input_side) +
                      " conflicts with backbone input_side " +
                      std::to_string(backbone.input_side));
  backbone.validate();
}

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["k"] = k;
  j["input_side"] = input_side;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["scales"] = scales;
  j["xattn_enabled"] = xattn_enabled;
  j["xattn_scaled"] = xattn_scaled;
  j["variant"] = variant;
  j["precision"] = precision;
  j["backbone"] = {{"stage_channels", backbone.stage_channels},
                   {"blocks_per_stage", backbone.blocks_per_stage},
                   {"input_side", backbone.input_side},
                   {"preset_name", backbone.preset_name}};
  j["paths"] = {{"corpus", paths.corpus}, {"checkpoint", paths.checkpoint}, {"report", paths.report}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.k = j.value("k", cfg.k);
  cfg.input_side = j.value("input_side", cfg.input_side);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.scales = j.value("scales", cfg.scales);
  cfg.xattn_enabled = j.value("xattn_enabled", cfg.xattn_enabled);
  cfg.xattn_scaled = j.value("xattn_scaled", cfg.xattn_scaled);
  cfg.variant = j.value("variant", cfg.variant);
  cfg.precision = j.value("precision", cfg.precision);
  if (j.contains("backbone")) {
    const auto& b = j["backbone"];
    cfg.backbone.stage_channels = b.value("stage_channels", cfg.backbone.stage_channels);
    cfg.backbone.blocks_per_stage = b.value("blocks_per_stage", cfg.backbone.blocks_per_stage);
    cfg.backbone.input_side = b.value("input_side", cfg.input_side);
    cfg.backbone.preset_name = b.value("preset_name", cfg.backbone.preset_name);
  } else {
    cfg.backbone.input_side = cfg.input_side;
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    cfg.paths.corpus = p.value("corpus", "");
    cfg.paths.checkpoint = p.value("checkpoint", "");
    cfg.paths.report = p.value("report", "");
  }
  return cfg;
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_json()); }

std::string RunConfig::hash_hex_str() const { return hash_hex(hash()); }

bool RunConfig::architecture_matches(const RunConfig& other) const {
  return architecture_diff(other).empty();
}

std::string RunConfig::architecture_diff(const RunConfig& other) const {
  std::string diff;
  auto mismatch = [&diff](const std::string& field, const std::string& a, const std::string& b) {
    diff += (diff.empty() ? "" : "; ") + field + ": " + a + " vs " + b;
  };
  if (k != other.k) mismatch("k", std::to_string(k), std::to_string(other.k));
  if (input_side != other.input_side)
    mismatch("input_side", std::to_string(input_side), std::to_string(other.input_side));
  if (scales != other.scales) mismatch("scales", std::to_string(scales), std::to_string(other.scales));
  if (xattn_enabled != other.xattn_enabled)
    mismatch("xattn_enabled", xattn_enabled ? "true" : "false", other.xattn_enabled ? "true" : "false");
  if (xattn_scaled != other.xattn_scaled)
    mismatch("xattn_scaled", xattn_scaled ? "true" : "false", other.xattn_scaled ? "true" : "false");
  if (variant != other.variant) mismatch("variant", variant, other.variant);
  if (backbone.stage_channels != other.backbone.stage_channels ||
      backbone.blocks_per_stage != other.backbone.blocks_per_stage ||
      backbone.preset_name != other.backbone.preset_name)
    mismatch("backbone", backbone.preset_name, other.backbone.preset_name);
  return diff;
}

}  // namespace recapdet
