#pragma once

#include <string>
#include <vector>

#include "recapdet/image.hpp"
#include "recapdet/synth.hpp"

namespace recapdet {

// Manifest record; pixels are loaded on demand.
struct SampleRecord {
  std::string path;
  int label = 0;
  int template_id = 0;
  int scene = 0;
  int device_profile = 0;
  Quality quality;
  std::string split;
  std::string hash;
};

struct Corpus {
  std::string dir;
  std::uint64_t seed = 0;
  int n_templates = 0;
  int size = 0;
  int jpeg_q = 75;
  std::vector<SampleRecord> records;
};

// Parses manifest.json and hard-asserts that the train/val/test template
// sets are pairwise disjoint.
Corpus load_corpus(const std::string& dir);

ImageU8 load_sample_image(const Corpus& corpus, const SampleRecord& rec);

// The four cross-domain evaluation scenarios. Models train on device 0,
// lossless; the scenarios vary device and compression on the test templates.
enum class Scenario { Intra, CrossDataset, CrossQuality, CrossBoth };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

std::vector<const SampleRecord*> select_pool(const Corpus& corpus, const std::string& split,
                                             int device_profile, Quality::Type quality);
std::vector<const SampleRecord*> scenario_pool(const Corpus& corpus, Scenario scenario);
std::vector<const SampleRecord*> train_pool(const Corpus& corpus);
std::vector<const SampleRecord*> val_pool(const Corpus& corpus);

}  // namespace recapdet
