#include "recapdet/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "recapdet/errors.hpp"

namespace recapdet {

namespace fs = std::filesystem;

Corpus load_corpus(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("no manifest.json in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest in " + dir + ": " + e.what());
  }

  Corpus c;
  c.dir = dir;
  c.seed = j.value("seed", 0ULL);
  c.n_templates = j.value("n_templates", 0);
  c.size = j.value("size", 0);
  c.jpeg_q = j.value("jpeg_q", 75);
  for (const auto& rec : j.at("samples")) {
    SampleRecord r;
    r.path = rec.at("path").get<std::string>();
    r.label = rec.at("label").get<int>();
    r.template_id = rec.at("template_id").get<int>();
    r.scene = rec.value("scene", 0);
    r.device_profile = rec.at("device_profile").get<int>();
    r.split = rec.at("split").get<std::string>();
    r.hash = rec.value("hash", "");
    const auto& q = rec.at("quality");
    r.quality.type = q.at("type").get<std::string>() == "jpeg" ? Quality::Jpeg : Quality::Lossless;
    r.quality.q = q.value("q", 0);
    if (r.label != 0 && r.label != 1)
      throw IoError("manifest: label " + std::to_string(r.label) + " at " + r.path);
    c.records.push_back(std::move(r));
  }
  if (c.records.empty()) throw IoError("manifest lists no samples in " + dir);

  // template-disjoint splits, asserted on every load
  std::map<std::string, std::set<int>> split_templates;
  for (const auto& r : c.records) split_templates[r.split].insert(r.template_id);
  std::vector<std::string> split_names;
  for (const auto& [name, tset] : split_templates) split_names.push_back(name);
  for (std::size_t a = 0; a < split_names.size(); ++a)
    for (std::size_t b = a + 1; b < split_names.size(); ++b)
      for (int t : split_templates[split_names[a]])
        if (split_templates[split_names[b]].count(t))
          throw ConfigError("corpus: template " + std::to_string(t) + " appears in both '" +
                            split_names[a] + "' and '" + split_names[b] + "' splits");
  return c;
}

ImageU8 load_sample_image(const Corpus& corpus, const SampleRecord& rec) {
  return load_image((fs::path(corpus.dir) / rec.path).string());
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Intra: return "intra";
    case Scenario::CrossDataset: return "cross-dataset";
    case Scenario::CrossQuality: return "cross-quality";
    case Scenario::CrossBoth: return "cross-dataset+quality";
  }
  return "?";
}

Scenario parse_scenario(const std::string& name) {
  if (name == "intra") return Scenario::Intra;
  if (name == "cross-dataset") return Scenario::CrossDataset;
  if (name == "cross-quality") return Scenario::CrossQuality;
  if (name == "cross-dataset+quality" || name == "cross-both") return Scenario::CrossBoth;
  throw ConfigError("unknown scenario: " + name +
                    " (want intra|cross-dataset|cross-quality|cross-dataset+quality)");
}

std::vector<const SampleRecord*> select_pool(const Corpus& corpus, const std::string& split,
                                             int device_profile, Quality::Type quality) {
  std::vector<const SampleRecord*> out;
  for (const auto& r : corpus.records)
    if (r.split == split && r.device_profile == device_profile && r.quality.type == quality)
      out.push_back(&r);
  if (out.empty())
    throw ConfigError("corpus has no samples for split=" + split + " device=" +
                      std::to_string(device_profile) + " quality=" +
                      (quality == Quality::Jpeg ? "jpeg" : "lossless"));
  return out;
}

std::vector<const SampleRecord*> scenario_pool(const Corpus& corpus, Scenario scenario) {
  switch (scenario) {
    case Scenario::Intra: return select_pool(corpus, "test", 0, Quality::Lossless);
    case Scenario::CrossDataset: return select_pool(corpus, "test", 1, Quality::Lossless);
    case Scenario::CrossQuality: return select_pool(corpus, "test", 0, Quality::Jpeg);
    case Scenario::CrossBoth: return select_pool(corpus, "test", 1, Quality::Jpeg);
  }
  throw ConfigError("bad scenario");
}

std::vector<const SampleRecord*> train_pool(const Corpus& corpus) {
  return select_pool(corpus, "train", 0, Quality::Lossless);
}

std::vector<const SampleRecord*> val_pool(const Corpus& corpus) {
  return select_pool(corpus, "val", 0, Quality::Lossless);
}

}  // namespace recapdet
