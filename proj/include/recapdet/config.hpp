#pragma once

#include <cstdint>
#include <string>

#include "recapdet/backbone.hpp"

namespace recapdet {

// One run's full provenance: serialized verbatim into every checkpoint and
// report. Desk-scale defaults; --paper-scale in the CLI restores batch 64.
struct RunConfig {
  std::uint64_t seed = 1;
  int k = 10;  // filter-bank threshold
  int input_side = 224;
  int batch_size = 16;
  int epochs = 20;
  double lr = 1e-4;
  int scales = 3;
  bool xattn_enabled = true;
  bool xattn_scaled = false;  // sqrt(C) logit scaling, off to match the fusion equation
  std::string variant = "proposed";
  std::string precision = "f32";  // f32 | f64
  BackboneConfig backbone;

  struct Paths {
    std::string corpus;
    std::string checkpoint;
    std::string report;
  } paths;

  void validate() const;

  // Canonical JSON (sorted keys); the config hash is FNV-1a over this text.
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  std::uint64_t hash() const;
  std::string hash_hex_str() const;

  // Architecture-defining fields must agree between a checkpoint's embedded
  // config and the flags requested at evaluation time.
  bool architecture_matches(const RunConfig& other) const;
  std::string architecture_diff(const RunConfig& other) const;
};

std::uint64_t fnv1a(const std::string& text);

}  // namespace recapdet
