#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "recapdet/image.hpp"

namespace recapdet {

struct Quality {
  enum Type { Lossless, Jpeg } type = Lossless;
  int q = 0;  // meaningful for Jpeg

  std::string str() const { return type == Lossless ? "lossless" : "jpeg(" + std::to_string(q) + ")"; }
  bool operator==(const Quality&) const = default;
};

// The dataset atom. Recaptured samples share the template and scene index of
// the genuine image they were derived from.
struct LabeledSample {
  ImageU8 image;
  int label = 0;  // 0 genuine, 1 recaptured
  int template_id = 0;
  int scene = 0;  // per-template shot index; pairs genuine <-> recaptured
  int device_profile = 0;
  Quality quality;
  std::string path;                      // relative path once written
  std::vector<std::uint8_t> jpeg_bytes;  // original encoding for jpeg samples
};

// Degradations the recapture chain injects: detail loss (blur + resample
// round trip) and color distortion (channel mixing), plus sensor noise.
struct RecaptureProfile {
  double blur_sigma = 1.0;        // [0.5, 3] for generated corpora; 0 = no blur
  Eigen::Matrix3d color_matrix = Eigen::Matrix3d::Identity();
  double resample_factor = 0.85;  // (0.5, 1]
  double noise_sigma = 1.0;       // >= 0, in 8-bit pixel units
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic document-like templates: background texture, text-line
// blocks, rules and a colored stamp, all layout-randomized per template.
std::vector<ImageU8> gen_templates(int n_templates, int size, std::uint64_t seed);

// blur -> down/up resample -> color mixing -> additive noise, clamped to
// [0,255]. An all-identity profile returns the input unchanged.
ImageU8 recapture(const ImageU8& img, const RecaptureProfile& profile);

// Encode/decode round trip at quality q; labels and ids survive, the quality
// tag switches to jpeg(q).
std::vector<LabeledSample> jpeg_duplicate(const std::vector<LabeledSample>& samples, int q);

// Document-wise split: indices of samples whose template falls in each set.
// The sets must be disjoint.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_splits(
    const std::vector<LabeledSample>& samples, const std::vector<int>& train_templates,
    const std::vector<int>& eval_templates);

struct SynthConfig {
  int n_templates = 12;
  int per_template = 40;  // lossless images per template; 4 per scene (2 labels x 2 devices)
  int size = 224;
  std::uint64_t seed = 1;
  int jpeg_q = 75;
  // template split: first train, then val, then test
  int train_templates = 8;
  int val_templates = 2;
};

// Full corpus: per scene one genuine + one recaptured image for each of the
// two device profiles, plus JPEG duplicates of everything.
std::vector<LabeledSample> generate_corpus(const SynthConfig& cfg);

std::string split_of_template(const SynthConfig& cfg, int template_id);

// corpus/{split}/{label}/{template}/{idx}.png|jpg plus manifest.json
void write_corpus(const std::vector<LabeledSample>& samples, const SynthConfig& cfg,
                  const std::string& dir);

// Gaussian blur / bilinear resample on byte images; exposed for tests.
ImageU8 gaussian_blur_u8(const ImageU8& img, double sigma);
ImageU8 resize_bilinear_u8(const ImageU8& img, int out_h, int out_w);

}  // namespace recapdet
