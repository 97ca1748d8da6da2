#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "recapdet/attention.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/ops.hpp"
#include "recapdet/rng.hpp"
#include "recapdet/tensor.hpp"

namespace recapdet {

// Three-stage residual CNN config. The tiny preset keeps the whole detector
// under 1M parameters; "resnet50" is a named preset for the stage widths of
// the original backbone (no pretrained weights are shipped).
struct BackboneConfig {
  std::array<int, 3> stage_channels = {16, 32, 64};
  std::array<int, 3> blocks_per_stage = {2, 2, 2};
  int input_side = 224;
  std::string preset_name = "tiny";

  static BackboneConfig preset(const std::string& name) {
    BackboneConfig cfg;
    cfg.preset_name = name;
    if (name == "tiny") {
      // defaults
    } else if (name == "resnet50") {
      cfg.stage_channels = {512, 1024, 2048};
      cfg.blocks_per_stage = {4, 6, 3};
    } else {
      throw ConfigError("unknown backbone preset: " + name);
    }
    return cfg;
  }

  void validate() const {
    for (int c : stage_channels)
      if (c < 1) throw ConfigError("backbone: stage channels must be positive");
    for (int b : blocks_per_stage)
      if (b < 1) throw ConfigError("backbone: blocks per stage must be positive");
    if (input_side < 112 || input_side % 16 != 0)
      throw ConfigError("backbone: input side must be a multiple of 16 and >= 112, got " +
                        std::to_string(input_side));
  }

  // Spatial sides of the three scale taps: side/4, side/8, side/16.
  std::array<int, 3> scale_sides() const {
    return {input_side / 4, input_side / 8, input_side / 16};
  }
};

namespace detail {

template <typename S>
Tensor<S> init_conv(Rng& rng, int c_out, int c_in, int kh, int kw) {
  // fan-in-scaled uniform
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in) * kh * kw);
  Tensor<S> w = Tensor<S>::zeros({c_out, c_in, kh, kw}, true);
  for (std::int64_t i = 0; i < w.size(); ++i)
    w.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  return w;
}

}  // namespace detail

template <typename S>
struct ConvBnLayer {
  Tensor<S> w;
  Tensor<S> gamma, beta;
  BnStats<S> stats;
  int stride = 1;
  int padding = 1;

  void init(Rng& rng, int c_out, int c_in, int k, int stride_, int padding_) {
    w = detail::init_conv<S>(rng, c_out, c_in, k, k);
    gamma = Tensor<S>::full({c_out}, S(1), true);
    beta = Tensor<S>::zeros({c_out}, true);
    stats = BnStats<S>::make(c_out);
    stride = stride_;
    padding = padding_;
  }

  Tensor<S> forward(const Tensor<S>& x, BnMode mode) {
    return batchnorm(conv2d(x, w, stride, padding), gamma, beta, stats, mode);
  }
};

// conv-bn-relu x2 with identity skip; a strided 1x1 projection matches shape
// when the block changes resolution or width.
template <typename S>
struct ResBlock {
  ConvBnLayer<S> conv1, conv2;
  ConvBnLayer<S> proj;
  bool has_proj = false;

  void init(Rng& rng, int c_in, int c_out, int stride) {
    conv1.init(rng, c_out, c_in, 3, stride, 1);
    conv2.init(rng, c_out, c_out, 3, 1, 1);
    has_proj = stride != 1 || c_in != c_out;
    if (has_proj) proj.init(rng, c_out, c_in, 1, stride, 0);
  }

  Tensor<S> forward(const Tensor<S>& x, BnMode mode) {
    Tensor<S> h = conv2.forward(relu(conv1.forward(x, mode)), mode);
    Tensor<S> skip = has_proj ? proj.forward(x, mode) : x;
    return relu(add(h, skip));
  }
};

// One branch: stem (stride-2 conv + 2x2 max pool) then three stages tapped
// after each stage. For input 224 the taps sit at 56, 28 and 14.
template <typename S>
struct Branch {
  ConvBnLayer<S> stem;
  std::array<std::vector<ResBlock<S>>, 3> stages;

  void init(Rng& rng, const BackboneConfig& cfg) {
    cfg.validate();
    stem.init(rng, cfg.stage_channels[0], 3, 3, 2, 1);
    int c_in = cfg.stage_channels[0];
    for (int s = 0; s < 3; ++s) {
      const int c_out = cfg.stage_channels[static_cast<std::size_t>(s)];
      stages[static_cast<std::size_t>(s)].resize(
          static_cast<std::size_t>(cfg.blocks_per_stage[static_cast<std::size_t>(s)]));
      for (std::size_t blk = 0; blk < stages[static_cast<std::size_t>(s)].size(); ++blk) {
        const int stride = (s > 0 && blk == 0) ? 2 : 1;
        stages[static_cast<std::size_t>(s)][blk].init(rng, blk == 0 ? c_in : c_out, c_out, stride);
      }
      c_in = c_out;
    }
  }

  std::array<Tensor<S>, 3> forward(const Tensor<S>& x, BnMode mode) {
    Tensor<S> h = maxpool2d(relu(stem.forward(x, mode)), 2, 2);
    std::array<Tensor<S>, 3> taps;
    for (std::size_t s = 0; s < 3; ++s) {
      for (auto& blk : stages[s]) h = blk.forward(h, mode);
      taps[s] = h;
    }
    return taps;
  }
};

// Runs both branches and pairs their taps. Branch weights are independent;
// perturbing one leaves the other's features untouched.
template <typename S>
ScaleFeatures<S> extract(Branch<S>& branch1, Branch<S>& branch2, const Tensor<S>& band,
                         const Tensor<S>& rgb, const BackboneConfig& cfg, BnMode mode) {
  int bb, cb, hb, wb, br, cr, hr, wr;
  split_batched(band.shape(), "extract", bb, cb, hb, wb);
  split_batched(rgb.shape(), "extract", br, cr, hr, wr);
  if (cb != 3 || cr != 3 || hb != cfg.input_side || wb != cfg.input_side || hr != hb || wr != wb ||
      bb != br)
    throw InputError("extract: inputs must both be [3," + std::to_string(cfg.input_side) + "," +
                     std::to_string(cfg.input_side) + "], got " + shape_str(band.shape()) +
                     " and " + shape_str(rgb.shape()));
  ScaleFeatures<S> f;
  f.x = branch1.forward(band, mode);
  f.y = branch2.forward(rgb, mode);
  return f;
}

}  // namespace recapdet
