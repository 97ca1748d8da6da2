#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "recapdet/attention.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/ops.hpp"
#include "recapdet/rng.hpp"
#include "recapdet/tensor.hpp"

namespace recapdet {

struct FusionConfig {
  int s_x = 7;
  int s_y = 7;
  int n_scales = 3;  // ablation lever; selects the deepest scales first
  int hidden_nodes = 256;
  int classes = 2;

  void validate() const {
    if (s_x < 1 || s_y < 1) throw ConfigError("fusion: target size must be positive");
    if (n_scales < 1 || n_scales > 3) throw ConfigError("fusion: n_scales must be in {1,2,3}");
    if (hidden_nodes < 1 || classes < 2) throw ConfigError("fusion: bad head dimensions");
  }
};

// A_i = Downsample_(7,7)(Concat(X_i^a, Y_i^a)): channel concat, max pooling
// with window/stride floor(H/7), then bilinear interpolation to exactly 7x7.
// For H already 7 the whole thing is a pass-through concat.
template <typename S>
Tensor<S> fuse_scale(const Tensor<S>& x_a, const Tensor<S>& y_a, const FusionConfig& cfg) {
  if (x_a.shape() != y_a.shape())
    throw InputError("fuse_scale: " + shape_str(x_a.shape()) + " vs " + shape_str(y_a.shape()));
  int b, c, h, w;
  split_batched(x_a.shape(), "fuse_scale", b, c, h, w);
  if (h < cfg.s_x || w < cfg.s_y)
    throw ShapeError("fuse_scale: input " + shape_str(x_a.shape()) + " smaller than target " +
                     std::to_string(cfg.s_x) + "x" + std::to_string(cfg.s_y));
  Tensor<S> cat = concat_channels(x_a, y_a);
  const int window = h / cfg.s_x;
  if (window > 1) cat = maxpool2d(cat, window, window);
  int ch, cw;
  {
    int bb, cc;
    split_batched(cat.shape(), "fuse_scale", bb, cc, ch, cw);
  }
  if (ch != cfg.s_x || cw != cfg.s_y) cat = bilinear_resize(cat, cfg.s_x, cfg.s_y);
  return cat;
}

// Classifier head: global average pool -> batch norm -> 2-layer MLP.
template <typename S>
struct FusionHead {
  Tensor<S> bn_gamma, bn_beta;
  BnStats<S> bn_stats;
  Tensor<S> fc1_w, fc1_b, fc2_w, fc2_b;
  int pooled_dim = 0;

  void init(Rng& rng, int pooled, const FusionConfig& cfg) {
    cfg.validate();
    pooled_dim = pooled;
    bn_gamma = Tensor<S>::full({pooled}, S(1), true);
    bn_beta = Tensor<S>::zeros({pooled}, true);
    bn_stats = BnStats<S>::make(pooled);
    auto init_fc = [&rng](int out, int in, Tensor<S>& w, Tensor<S>& bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      w = Tensor<S>::zeros({out, in}, true);
      for (std::int64_t i = 0; i < w.size(); ++i)
        w.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
      bias = Tensor<S>::zeros({out}, true);
      for (std::int64_t i = 0; i < bias.size(); ++i)
        bias.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
    };
    init_fc(cfg.hidden_nodes, pooled, fc1_w, fc1_b);
    init_fc(cfg.classes, cfg.hidden_nodes, fc2_w, fc2_b);
  }

  Tensor<S> forward(const Tensor<S>& pooled, BnMode mode) {
    Tensor<S> h = batchnorm(pooled, bn_gamma, bn_beta, bn_stats, mode);
    return linear(relu(linear(h, fc1_w, fc1_b)), fc2_w, fc2_b);
  }
};

// Fused logits from the attended per-scale pairs. Scales concatenate along
// channels in ascending order (A_1, A_2, A_3); with n_scales < 3 only the
// deepest maps participate, so the pooled width is 2 * sum of their channels.
template <typename S>
Tensor<S> fuse_and_classify(const AttendedFeatures<S>& attended, const FusionConfig& cfg,
                            FusionHead<S>& head, BnMode mode) {
  cfg.validate();
  std::vector<Tensor<S>> fused;
  for (int i = 3 - cfg.n_scales; i < 3; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!attended.xa[idx].defined() || !attended.ya[idx].defined())
      throw ConfigError("fuse_and_classify: missing attended features at scale " +
                        std::to_string(i + 1));
    fused.push_back(fuse_scale(attended.xa[idx], attended.ya[idx], cfg));
  }
  Tensor<S> cat = fused.size() == 1 ? fused[0] : concat_channels(fused);
  Tensor<S> pooled = avgpool_global(cat);
  if (pooled.rank() == 1) pooled = reshape(pooled, {1, pooled.dim(0)});
  if (pooled.dim(1) != head.pooled_dim)
    throw ConfigError("fuse_and_classify: pooled width " + std::to_string(pooled.dim(1)) +
                      " does not match head width " + std::to_string(head.pooled_dim));
  return head.forward(pooled, mode);
}

}  // namespace recapdet
