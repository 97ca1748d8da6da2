#include "recapdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "recapdet/errors.hpp"
#include "recapdet/ops.hpp"
#include "recapdet/rng.hpp"

namespace recapdet {

namespace fs = std::filesystem;

void RecaptureProfile::validate() const {
  if (blur_sigma < 0.0 || blur_sigma > 3.0)
    throw ConfigError("recapture profile: blur sigma " + std::to_string(blur_sigma) +
                      " outside [0,3]");
  if (resample_factor <= 0.5 || resample_factor > 1.0)
    throw ConfigError("recapture profile: resample factor " + std::to_string(resample_factor) +
                      " outside (0.5,1]");
  if (noise_sigma < 0.0) throw ConfigError("recapture profile: negative noise sigma");
  for (int r = 0; r < 3; ++r) {
    const double s = color_matrix.row(r).sum();
    if (std::fabs(s - 1.0) > 0.1)
      throw ConfigError("recapture profile: color matrix row " + std::to_string(r) + " sums to " +
                        std::to_string(s) + ", want 1 +- 0.1");
  }
}

// ---------------------------------------------------------------------------
// raster helpers

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

void fill_rect(ImageU8& img, int y0, int x0, int h, int w, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  const int y1 = std::min(img.height, y0 + h);
  const int x1 = std::min(img.width, x0 + w);
  for (int y = std::max(0, y0); y < y1; ++y)
    for (int x = std::max(0, x0); x < x1; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
}

void fill_disk(ImageU8& img, int cy, int cx, int radius, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  for (int y = std::max(0, cy - radius); y < std::min(img.height, cy + radius + 1); ++y)
    for (int x = std::max(0, cx - radius); x < std::min(img.width, cx + radius + 1); ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
      }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

ImageU8 gaussian_blur_u8(const ImageU8& img, double sigma) {
  if (sigma < 1e-9) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size()) / 2;
  const int h = img.height, w = img.width;
  std::vector<double> tmp(static_cast<std::size_t>(h) * w * 3);
  // horizontal
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] * img.at(y, reflect(x + t, w), c);
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  // vertical
  ImageU8 out = img;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t)
          acc += k[static_cast<std::size_t>(t + radius)] *
                 tmp[(static_cast<std::size_t>(reflect(y + t, h)) * w + x) * 3 + c];
        out.at(y, x, c) = clamp_u8(acc);
      }
  return out;
}

ImageU8 resize_bilinear_u8(const ImageU8& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear_u8: non-positive target");
  if (out_h == img.height && out_w == img.width) return img;
  const BilinearAxis ay = bilinear_axis(img.height, out_h);
  const BilinearAxis ax = bilinear_axis(img.width, out_w);
  ImageU8 out;
  out.height = out_h;
  out.width = out_w;
  out.pixels.resize(static_cast<std::size_t>(out_h) * out_w * 3);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double wy1 = ay.w1[y], wx1 = ax.w1[x];
        const double v =
            (1 - wy1) * ((1 - wx1) * img.at(ay.i0[y], ax.i0[x], c) + wx1 * img.at(ay.i0[y], ax.i1[x], c)) +
            wy1 * ((1 - wx1) * img.at(ay.i1[y], ax.i0[x], c) + wx1 * img.at(ay.i1[y], ax.i1[x], c));
        out.at(y, x, c) = clamp_u8(v);
      }
  return out;
}

// ---------------------------------------------------------------------------
// templates

std::vector<ImageU8> gen_templates(int n_templates, int size, std::uint64_t seed) {
  if (n_templates < 2) throw ConfigError("gen_templates: need at least 2 templates");
  if (size < 32) throw ConfigError("gen_templates: size too small");
  std::vector<ImageU8> out;
  Rng root(seed);
  for (int t = 0; t < n_templates; ++t) {
    Rng rng = root.fork(static_cast<std::uint64_t>(t) + 1);
    // paper tone with a slight per-template tint
    const int base = rng.range(225, 248);
    const int tint_r = rng.range(-6, 6), tint_g = rng.range(-6, 6), tint_b = rng.range(-6, 6);
    ImageU8 img = ImageU8::filled(size, size, clamp_u8(base + tint_r), clamp_u8(base + tint_g),
                                  clamp_u8(base + tint_b));
    // background texture
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double n = rng.normal(0.0, 2.0);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp_u8(img.at(y, x, c) + n);
      }
    // header bar
    const int header_h = rng.range(size / 16, size / 10);
    fill_rect(img, rng.range(2, 6), rng.range(4, size / 4), header_h, rng.range(size / 2, size - 24),
              static_cast<std::uint8_t>(rng.range(30, 80)), static_cast<std::uint8_t>(rng.range(30, 80)),
              static_cast<std::uint8_t>(rng.range(30, 90)));
    // text lines: rows of dark word blocks with random widths and gaps
    int y = rng.range(size / 6, size / 4);
    const int line_h = rng.range(4, 7);
    const int line_gap = rng.range(5, 9);
    while (y + line_h < size - size / 8) {
      int x = rng.range(6, 14);
      const int right = size - rng.range(6, 20);
      while (x < right) {
        const int word = rng.range(6, 22);
        const int ink = rng.range(20, 70);
        fill_rect(img, y, x, line_h, std::min(word, right - x), static_cast<std::uint8_t>(ink),
                  static_cast<std::uint8_t>(ink), static_cast<std::uint8_t>(ink + rng.range(0, 15)));
        x += word + rng.range(3, 8);
      }
      y += line_h + line_gap;
      if (rng.uniform() < 0.15) y += line_gap;  // paragraph break
    }
    // one or two horizontal rules
    for (int rule = 0, n_rules = rng.range(1, 2); rule < n_rules; ++rule)
      fill_rect(img, rng.range(size / 3, size - 12), 8, 2, size - 16, 60, 60, 60);
    // stamp: colored disk, hue distinct per template
    const int hue = rng.range(0, 2);
    const std::uint8_t sr = static_cast<std::uint8_t>(hue == 0 ? rng.range(150, 220) : rng.range(30, 90));
    const std::uint8_t sg = static_cast<std::uint8_t>(hue == 1 ? rng.range(120, 190) : rng.range(30, 90));
    const std::uint8_t sb = static_cast<std::uint8_t>(hue == 2 ? rng.range(150, 220) : rng.range(40, 100));
    fill_disk(img, rng.range(size * 2 / 3, size - 24), rng.range(size * 2 / 3, size - 24),
              rng.range(size / 14, size / 9), sr, sg, sb);
    out.push_back(std::move(img));
  }
  return out;
}

// ---------------------------------------------------------------------------
// recapture chain

ImageU8 recapture(const ImageU8& img, const RecaptureProfile& profile) {
  profile.validate();
  if (img.empty()) throw InputError("recapture: empty image");
  ImageU8 out = gaussian_blur_u8(img, profile.blur_sigma);
  if (profile.resample_factor < 1.0) {
    const int small_h = std::max(8, static_cast<int>(std::lround(img.height * profile.resample_factor)));
    const int small_w = std::max(8, static_cast<int>(std::lround(img.width * profile.resample_factor)));
    out = resize_bilinear_u8(resize_bilinear_u8(out, small_h, small_w), img.height, img.width);
  }
  const bool mix = !profile.color_matrix.isIdentity(0.0);
  Rng rng(profile.seed ? profile.seed : 0x5eedULL);
  const bool noisy = profile.noise_sigma > 0.0;
  if (mix || noisy) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        double px[3] = {static_cast<double>(out.at(y, x, 0)), static_cast<double>(out.at(y, x, 1)),
                        static_cast<double>(out.at(y, x, 2))};
        double mixed[3];
        for (int c = 0; c < 3; ++c) {
          mixed[c] = mix ? profile.color_matrix(c, 0) * px[0] + profile.color_matrix(c, 1) * px[1] +
                               profile.color_matrix(c, 2) * px[2]
                         : px[c];
          if (noisy) mixed[c] += rng.normal(0.0, profile.noise_sigma);
        }
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp_u8(mixed[c]);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// corpus

namespace {

// Two disjoint parameter ranges emulate the Dataset1/Dataset2 device split.
RecaptureProfile draw_profile(Rng& rng, int device) {
  RecaptureProfile p;
  if (device == 0) {
    p.blur_sigma = rng.uniform(0.8, 1.2);
    p.resample_factor = rng.uniform(0.80, 0.92);
    p.noise_sigma = rng.uniform(1.0, 2.0);
  } else {
    p.blur_sigma = rng.uniform(1.7, 2.4);
    p.resample_factor = rng.uniform(0.56, 0.72);
    p.noise_sigma = rng.uniform(2.5, 4.5);
  }
  // rows sum to 1 exactly: off-diagonal leakage a+b taken from the diagonal
  const double lo = device == 0 ? 0.04 : 0.09;
  const double hi = device == 0 ? 0.08 : 0.16;
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (int r = 0; r < 3; ++r) {
    const double a = rng.uniform(lo, hi) * 0.5;
    const double b = rng.uniform(lo, hi) * 0.5;
    m(r, r) = 1.0 - a - b;
    m(r, (r + 1) % 3) = a;
    m(r, (r + 2) % 3) = b;
  }
  p.color_matrix = m;
  p.seed = rng.next_u64();
  return p;
}

// Genuine capture: small global gain, per-device tint and mild sensor noise
// so images within a template are not byte-identical.
ImageU8 genuine_capture(const ImageU8& tpl, Rng& rng, int device) {
  const double gain = rng.uniform(0.94, 1.06);
  const double tint[3] = {device == 0 ? rng.uniform(0.0, 2.5) : rng.uniform(-2.5, 0.0),
                          rng.uniform(-1.0, 1.0),
                          device == 0 ? rng.uniform(-2.5, 0.0) : rng.uniform(0.0, 2.5)};
  const double sigma = rng.uniform(0.5, 1.2);
  ImageU8 out = tpl;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp_u8(gain * out.at(y, x, c) + tint[c] + rng.normal(0.0, sigma));
  return out;
}

}  // namespace

std::vector<LabeledSample> generate_corpus(const SynthConfig& cfg) {
  if (cfg.per_template < 4 || cfg.per_template % 4 != 0)
    throw ConfigError("synth: per_template must be a positive multiple of 4 (2 labels x 2 devices)");
  if (cfg.train_templates + cfg.val_templates >= cfg.n_templates)
    throw ConfigError("synth: template split leaves no test templates");
  if (cfg.jpeg_q < 1 || cfg.jpeg_q > 100) throw ConfigError("synth: jpeg quality outside [1,100]");

  const int scenes = cfg.per_template / 4;
  std::vector<ImageU8> templates = gen_templates(cfg.n_templates, cfg.size, cfg.seed);
  std::vector<LabeledSample> out;
  Rng root(cfg.seed ^ 0xc0ffeeULL);
  for (int t = 0; t < cfg.n_templates; ++t) {
    for (int scene = 0; scene < scenes; ++scene) {
      for (int device = 0; device < 2; ++device) {
        Rng rng = root.fork((static_cast<std::uint64_t>(t) << 20) ^
                            (static_cast<std::uint64_t>(scene) << 4) ^ static_cast<std::uint64_t>(device));
        LabeledSample genuine;
        genuine.image = genuine_capture(templates[static_cast<std::size_t>(t)], rng, device);
        genuine.label = 0;
        genuine.template_id = t;
        genuine.scene = scene;
        genuine.device_profile = device;
        genuine.quality = {Quality::Lossless, 0};

        LabeledSample recap;
        recap.image = recapture(genuine.image, draw_profile(rng, device));
        recap.label = 1;
        recap.template_id = t;
        recap.scene = scene;
        recap.device_profile = device;
        recap.quality = {Quality::Lossless, 0};

        out.push_back(std::move(genuine));
        out.push_back(std::move(recap));
      }
    }
  }
  std::vector<LabeledSample> jpeg = jpeg_duplicate(out, cfg.jpeg_q);
  out.insert(out.end(), std::make_move_iterator(jpeg.begin()), std::make_move_iterator(jpeg.end()));
  return out;
}

std::vector<LabeledSample> jpeg_duplicate(const std::vector<LabeledSample>& samples, int q) {
  if (q < 1 || q > 100) throw ConfigError("jpeg_duplicate: quality outside [1,100]");
  std::vector<LabeledSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    LabeledSample dup = s;
    dup.jpeg_bytes = encode_jpeg(s.image, q);
    dup.image = decode_jpeg(dup.jpeg_bytes);
    dup.quality = {Quality::Jpeg, q};
    dup.path.clear();
    out.push_back(std::move(dup));
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> make_splits(
    const std::vector<LabeledSample>& samples, const std::vector<int>& train_templates,
    const std::vector<int>& eval_templates) {
  std::set<int> train_set(train_templates.begin(), train_templates.end());
  std::set<int> eval_set(eval_templates.begin(), eval_templates.end());
  for (int t : train_set)
    if (eval_set.count(t))
      throw ConfigError("make_splits: template " + std::to_string(t) + " in both splits");
  std::vector<std::size_t> train, eval;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (train_set.count(samples[i].template_id)) train.push_back(i);
    if (eval_set.count(samples[i].template_id)) eval.push_back(i);
  }
  return {std::move(train), std::move(eval)};
}

std::string split_of_template(const SynthConfig& cfg, int template_id) {
  if (template_id < cfg.train_templates) return "train";
  if (template_id < cfg.train_templates + cfg.val_templates) return "val";
  return "test";
}

void write_corpus(const std::vector<LabeledSample>& samples, const SynthConfig& cfg,
                  const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["n_templates"] = cfg.n_templates;
  manifest["per_template"] = cfg.per_template;
  manifest["size"] = cfg.size;
  manifest["jpeg_q"] = cfg.jpeg_q;
  manifest["train_templates"] = cfg.train_templates;
  manifest["val_templates"] = cfg.val_templates;
  manifest["samples"] = nlohmann::json::array();

  std::map<std::string, int> counters;
  for (const auto& s : samples) {
    const std::string split = split_of_template(cfg, s.template_id);
    const std::string label = s.label ? "recaptured" : "genuine";
    char tdir[16];
    std::snprintf(tdir, sizeof(tdir), "%03d", s.template_id);
    const std::string rel_dir = split + "/" + label + "/" + tdir;
    fs::create_directories(fs::path(dir) / rel_dir);
    const int idx = counters[rel_dir]++;
    char fname[32];
    std::snprintf(fname, sizeof(fname), "%04d.%s", idx, s.quality.type == Quality::Jpeg ? "jpg" : "png");
    const std::string rel = rel_dir + "/" + fname;
    const std::string full = (fs::path(dir) / rel).string();
    if (s.quality.type == Quality::Jpeg) {
      // write the original encoding so decode(load) == the in-memory pixels
      if (s.jpeg_bytes.empty()) {
        save_jpeg(s.image, full, s.quality.q);
      } else {
        std::ofstream jf(full, std::ios::binary);
        jf.write(reinterpret_cast<const char*>(s.jpeg_bytes.data()),
                 static_cast<std::streamsize>(s.jpeg_bytes.size()));
        if (!jf) throw IoError("short write to " + full);
      }
    } else {
      save_png(s.image, full);
    }

    nlohmann::json rec;
    rec["path"] = rel;
    rec["label"] = s.label;
    rec["template_id"] = s.template_id;
    rec["scene"] = s.scene;
    rec["split"] = split;
    rec["device_profile"] = s.device_profile;
    rec["quality"] = {{"type", s.quality.type == Quality::Jpeg ? "jpeg" : "lossless"},
                      {"q", s.quality.q}};
    rec["hash"] = hash_hex(content_hash(s.image));
    manifest["samples"].push_back(std::move(rec));
  }
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest in " + dir);
  mf << manifest.dump(1);
}

}  // namespace recapdet
