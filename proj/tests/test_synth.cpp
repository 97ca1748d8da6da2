#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "recapdet/dataset.hpp"
#include "recapdet/filterbank.hpp"
#include "recapdet/synth.hpp"

using namespace recapdet;

namespace {

double high_band_energy(const ImageU8& img, int k = 10) {
  const int n = img.height;
  const Eigen::MatrixXd coeffs = dct2d(to_grayscale(img, n));
  const BandMasks masks = make_band_masks(k, n);
  return coeffs.cwiseProduct(masks.high).squaredNorm();
}

Eigen::Matrix3d channel_correlation(const ImageU8& img) {
  const std::int64_t n = static_cast<std::int64_t>(img.height) * img.width;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < img.pixels.size(); i += 3)
    for (int c = 0; c < 3; ++c) mean[c] += img.pixels[i + static_cast<std::size_t>(c)];
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < img.pixels.size(); i += 3)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        cov(a, b) += (img.pixels[i + static_cast<std::size_t>(a)] - mean[a]) *
                     (img.pixels[i + static_cast<std::size_t>(b)] - mean[b]);
  cov /= static_cast<double>(n);
  Eigen::Matrix3d corr;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      corr(a, b) = cov(a, b) / std::sqrt(std::max(cov(a, a) * cov(b, b), 1e-12));
  return corr;
}

double psnr(const ImageU8& a, const ImageU8& b) {
  double mse = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / std::max(mse, 1e-12));
}

}  // namespace

TEST_CASE("templates are deterministic and distinct") {
  auto a = gen_templates(12, 128, 42);
  auto b = gen_templates(12, 128, 42);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].pixels == b[i].pixels);

  auto c = gen_templates(12, 128, 43);
  CHECK(c[0].pixels != a[0].pixels);

  // distinct templates differ in more than 10% of pixels
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      std::size_t diff = 0;
      for (std::size_t p = 0; p < a[i].pixels.size(); p += 3)
        if (a[i].pixels[p] != a[j].pixels[p] || a[i].pixels[p + 1] != a[j].pixels[p + 1] ||
            a[i].pixels[p + 2] != a[j].pixels[p + 2])
          ++diff;
      CHECK(static_cast<double>(diff) > 0.10 * static_cast<double>(a[i].pixels.size() / 3));
    }

  CHECK_THROWS_AS(gen_templates(1, 128, 1), ConfigError);
}

TEST_CASE("identity recapture profile is a no-op") {
  auto tpl = gen_templates(2, 96, 7)[0];
  RecaptureProfile identity;
  identity.blur_sigma = 0.0;
  identity.resample_factor = 1.0;
  identity.color_matrix = Eigen::Matrix3d::Identity();
  identity.noise_sigma = 0.0;
  ImageU8 out = recapture(tpl, identity);
  CHECK(out.pixels == tpl.pixels);
}

TEST_CASE("recapture strictly lowers high-band energy") {
  auto tpl = gen_templates(2, 128, 11)[0];
  RecaptureProfile p;
  p.blur_sigma = 1.5;
  p.resample_factor = 0.7;
  p.noise_sigma = 0.0;  // noise adds back wideband energy; isolate detail loss
  p.seed = 5;
  ImageU8 out = recapture(tpl, p);
  CHECK(high_band_energy(out) < high_band_energy(tpl));
}

TEST_CASE("color mixing shifts the channel correlation matrix") {
  auto tpl = gen_templates(2, 128, 13)[1];
  RecaptureProfile p;
  p.blur_sigma = 0.0;
  p.resample_factor = 1.0;
  p.noise_sigma = 0.0;
  p.color_matrix << 0.90, 0.06, 0.04, 0.05, 0.92, 0.03, 0.02, 0.05, 0.93;
  ImageU8 out = recapture(tpl, p);
  const double delta = (channel_correlation(out) - channel_correlation(tpl)).norm();
  CHECK(delta > 1e-3);
}

TEST_CASE("profile validation") {
  RecaptureProfile p;
  p.blur_sigma = 5.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.blur_sigma = 1.0;
  p.resample_factor = 0.3;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.resample_factor = 0.8;
  p.color_matrix.row(0) << 0.5, 0.2, 0.1;  // sums to 0.8
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.color_matrix = Eigen::Matrix3d::Identity();
  p.noise_sigma = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("jpeg duplicates") {
  auto tpl = gen_templates(2, 96, 17);
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 2; ++i) {
    LabeledSample s;
    s.image = tpl[static_cast<std::size_t>(i)];
    s.label = i;
    s.template_id = i;
    samples.push_back(std::move(s));
  }
  auto dup100 = jpeg_duplicate(samples, 100);
  REQUIRE(dup100.size() == 2);
  CHECK(psnr(samples[0].image, dup100[0].image) >= 40.0);
  CHECK(dup100[0].quality == Quality{Quality::Jpeg, 100});
  CHECK(dup100[0].label == samples[0].label);
  CHECK(dup100[1].label == samples[1].label);
  CHECK(dup100[1].template_id == samples[1].template_id);

  auto dup75 = jpeg_duplicate(samples, 75);
  CHECK(psnr(samples[0].image, dup75[0].image) < psnr(samples[0].image, dup100[0].image));

  CHECK_THROWS_AS(jpeg_duplicate(samples, 0), ConfigError);
  CHECK_THROWS_AS(jpeg_duplicate(samples, 101), ConfigError);
}

TEST_CASE("split disjointness") {
  std::vector<LabeledSample> samples;
  for (int t = 0; t < 12; ++t) {
    LabeledSample s;
    s.image = ImageU8::filled(8, 8, 1, 2, 3);
    s.template_id = t;
    samples.push_back(std::move(s));
  }
  auto [train, eval] = make_splits(samples, {0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11});
  CHECK(train.size() == 8);
  CHECK(eval.size() == 4);
  for (std::size_t i : train)
    for (std::size_t j : eval) CHECK(samples[i].template_id != samples[j].template_id);

  CHECK_THROWS_AS(make_splits(samples, {0, 1, 2}, {2, 3}), ConfigError);
}

TEST_CASE("corpus generation is deterministic and separable") {
  SynthConfig cfg;
  cfg.n_templates = 4;
  cfg.per_template = 8;
  cfg.size = 96;
  cfg.seed = 77;
  cfg.train_templates = 2;
  cfg.val_templates = 1;

  auto corpus1 = generate_corpus(cfg);
  auto corpus2 = generate_corpus(cfg);
  REQUIRE(corpus1.size() == corpus2.size());
  // 4 templates x 2 scenes x 2 devices x 2 labels = 32 lossless + 32 jpeg
  CHECK(corpus1.size() == 64);
  for (std::size_t i = 0; i < corpus1.size(); ++i) {
    CHECK(content_hash(corpus1[i].image) == content_hash(corpus2[i].image));
    CHECK(corpus1[i].label == corpus2[i].label);
  }

  // recapture monotonicity: mean high-band energy drops for recaptured
  double genuine_sum = 0, recap_sum = 0;
  int genuine_n = 0, recap_n = 0;
  for (const auto& s : corpus1) {
    if (s.quality.type != Quality::Lossless) continue;
    const double e = high_band_energy(s.image);
    if (s.label == 0) {
      genuine_sum += e;
      ++genuine_n;
    } else {
      recap_sum += e;
      ++recap_n;
    }
  }
  REQUIRE(genuine_n > 0);
  REQUIRE(recap_n > 0);
  CHECK(recap_sum / recap_n < genuine_sum / genuine_n);

  CHECK_THROWS_AS(generate_corpus([&] {
                    SynthConfig bad = cfg;
                    bad.per_template = 6;  // not a multiple of 4
                    return bad;
                  }()),
                  ConfigError);
}

TEST_CASE("corpus writes and reloads with scenario pools") {
  SynthConfig cfg;
  cfg.n_templates = 4;
  cfg.per_template = 8;
  cfg.size = 64;
  cfg.seed = 5;
  cfg.train_templates = 2;
  cfg.val_templates = 1;
  const std::string dir =
      (std::filesystem::temp_directory_path() / "rd_corpus_test").string();
  std::filesystem::remove_all(dir);
  write_corpus(generate_corpus(cfg), cfg, dir);

  Corpus corpus = load_corpus(dir);
  CHECK(corpus.records.size() == 64);
  CHECK(corpus.n_templates == 4);

  // scenario pools pick the right slice of the test split
  for (Scenario s : {Scenario::Intra, Scenario::CrossDataset, Scenario::CrossQuality, Scenario::CrossBoth}) {
    auto pool = scenario_pool(corpus, s);
    CHECK(pool.size() == 4);  // 1 test template x 2 scenes x 2 labels
    for (const SampleRecord* r : pool) {
      CHECK(r->split == "test");
      const bool jpeg = s == Scenario::CrossQuality || s == Scenario::CrossBoth;
      const int device = (s == Scenario::CrossDataset || s == Scenario::CrossBoth) ? 1 : 0;
      CHECK(r->quality.type == (jpeg ? Quality::Jpeg : Quality::Lossless));
      CHECK(r->device_profile == device);
    }
  }

  // loading an image round-trips the recorded content hash
  const SampleRecord& rec = corpus.records[0];
  CHECK(hash_hex(content_hash(load_sample_image(corpus, rec))) == rec.hash);

  // tampered manifest with overlapping templates must be rejected
  {
    std::ifstream in(std::filesystem::path(dir) / "manifest.json");
    nlohmann::json j;
    in >> j;
    j["samples"][0]["split"] = "test";  // template 0 is a train template
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    out << j.dump();
  }
  CHECK_THROWS_AS(load_corpus(dir), ConfigError);
  std::filesystem::remove_all(dir);
}
