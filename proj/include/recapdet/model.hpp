#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recapdet/attention.hpp"
#include "recapdet/backbone.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/fusion.hpp"
#include "recapdet/rng.hpp"

namespace recapdet {

// Ablation variants of the detector. Branch1 drops branch2 and the fusion
// stack entirely; BaseFusion keeps both branches but swaps cross attention
// for identity; Proposed is the full model.
enum class Variant { Branch1, BaseFusion, Proposed };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Branch1: return "branch1";
    case Variant::BaseFusion: return "base-fusion";
    case Variant::Proposed: return "proposed";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "branch1") return Variant::Branch1;
  if (s == "base-fusion") return Variant::BaseFusion;
  if (s == "proposed") return Variant::Proposed;
  throw ConfigError("unknown variant: " + s + " (want branch1|base-fusion|proposed)");
}

template <typename S>
class DetectorModel {
 public:
  BackboneConfig backbone_cfg;
  FusionConfig fusion_cfg;
  Variant variant = Variant::Proposed;
  bool xattn_scaled = false;

  Branch<S> branch1, branch2;
  std::array<AttnWeights<S>, 3> attn_fwd, attn_rev;
  FusionHead<S> head;

  void init(std::uint64_t seed) {
    backbone_cfg.validate();
    fusion_cfg.validate();
    Rng rng(seed);
    branch1.init(rng, backbone_cfg);
    if (variant != Variant::Branch1) {
      branch2.init(rng, backbone_cfg);
      if (variant == Variant::Proposed) {
        for (int i = 3 - fusion_cfg.n_scales; i < 3; ++i) {
          const int c = backbone_cfg.stage_channels[static_cast<std::size_t>(i)];
          for (auto* set : {&attn_fwd, &attn_rev}) {
            auto& w = (*set)[static_cast<std::size_t>(i)];
            w.wq = detail::init_conv<S>(rng, c, c, 1, 1);
            w.wk = detail::init_conv<S>(rng, c, c, 1, 1);
            w.wv = detail::init_conv<S>(rng, c, c, 1, 1);
          }
        }
      }
    }
    head.init(rng, pooled_width(), fusion_cfg);
  }

  int pooled_width() const {
    if (variant == Variant::Branch1) return backbone_cfg.stage_channels[2];
    int w = 0;
    for (int i = 3 - fusion_cfg.n_scales; i < 3; ++i)
      w += 2 * backbone_cfg.stage_channels[static_cast<std::size_t>(i)];
    return w;
  }

  Tensor<S> forward(const Tensor<S>& band, const Tensor<S>& rgb, BnMode mode) {
    if (variant == Variant::Branch1) {
      auto taps = branch1.forward(band, mode);
      Tensor<S> pooled = avgpool_global(taps[2]);
      if (pooled.rank() == 1) pooled = reshape(pooled, {1, pooled.dim(0)});
      return head.forward(pooled, mode);
    }
    ScaleFeatures<S> f = extract(branch1, branch2, band, rgb, backbone_cfg, mode);
    AttendedFeatures<S> attended;
    if (variant == Variant::Proposed) {
      attended = attend_all(f, attn_fwd, attn_rev, fusion_cfg.n_scales, xattn_scaled);
    } else {
      for (int i = 3 - fusion_cfg.n_scales; i < 3; ++i) {
        attended.xa[static_cast<std::size_t>(i)] = f.x[static_cast<std::size_t>(i)];
        attended.ya[static_cast<std::size_t>(i)] = f.y[static_cast<std::size_t>(i)];
      }
    }
    return fuse_and_classify(attended, fusion_cfg, head, mode);
  }

  // Trainable tensors in checkpoint order.
  std::vector<std::pair<std::string, Tensor<S>>> named_params() {
    std::vector<std::pair<std::string, Tensor<S>>> out;
    collect_branch("b1.", branch1, out);
    if (variant != Variant::Branch1) {
      collect_branch("b2.", branch2, out);
      if (variant == Variant::Proposed) {
        for (int i = 3 - fusion_cfg.n_scales; i < 3; ++i) {
          const std::string base = "xattn.s" + std::to_string(i + 1) + ".";
          const auto idx = static_cast<std::size_t>(i);
          out.emplace_back(base + "fwd.q", attn_fwd[idx].wq);
          out.emplace_back(base + "fwd.k", attn_fwd[idx].wk);
          out.emplace_back(base + "fwd.v", attn_fwd[idx].wv);
          out.emplace_back(base + "rev.q", attn_rev[idx].wq);
          out.emplace_back(base + "rev.k", attn_rev[idx].wk);
          out.emplace_back(base + "rev.v", attn_rev[idx].wv);
        }
      }
    }
    out.emplace_back("fusion.bn.gamma", head.bn_gamma);
    out.emplace_back("fusion.bn.beta", head.bn_beta);
    out.emplace_back("head.fc1.w", head.fc1_w);
    out.emplace_back("head.fc1.b", head.fc1_b);
    out.emplace_back("head.fc2.w", head.fc2_w);
    out.emplace_back("head.fc2.b", head.fc2_b);
    return out;
  }

  // Batch-norm running statistics; saved with checkpoints, never trained.
  std::vector<std::pair<std::string, Vec<S>*>> named_buffers() {
    std::vector<std::pair<std::string, Vec<S>*>> out;
    collect_branch_buffers("b1.", branch1, out);
    if (variant != Variant::Branch1) collect_branch_buffers("b2.", branch2, out);
    out.emplace_back("fusion.bn.running_mean", &head.bn_stats.running_mean);
    out.emplace_back("fusion.bn.running_var", &head.bn_stats.running_var);
    return out;
  }

  std::vector<Tensor<S>> params() {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : named_params()) t.zero_grad();
  }

 private:
  static void collect_conv_bn(const std::string& prefix, ConvBnLayer<S>& l,
                              std::vector<std::pair<std::string, Tensor<S>>>& out) {
    out.emplace_back(prefix + "conv.w", l.w);
    out.emplace_back(prefix + "bn.gamma", l.gamma);
    out.emplace_back(prefix + "bn.beta", l.beta);
  }

  static void collect_branch(const std::string& prefix, Branch<S>& br,
                             std::vector<std::pair<std::string, Tensor<S>>>& out) {
    collect_conv_bn(prefix + "stem.", br.stem, out);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t blk = 0; blk < br.stages[s].size(); ++blk) {
        const std::string base =
            prefix + "s" + std::to_string(s + 1) + ".b" + std::to_string(blk) + ".";
        auto& rb = br.stages[s][blk];
        collect_conv_bn(base + "1.", rb.conv1, out);
        collect_conv_bn(base + "2.", rb.conv2, out);
        if (rb.has_proj) collect_conv_bn(base + "proj.", rb.proj, out);
      }
  }

  static void collect_branch_buffers(const std::string& prefix, Branch<S>& br,
                                     std::vector<std::pair<std::string, Vec<S>*>>& out) {
    auto add = [&out](const std::string& base, ConvBnLayer<S>& l) {
      out.emplace_back(base + "bn.running_mean", &l.stats.running_mean);
      out.emplace_back(base + "bn.running_var", &l.stats.running_var);
    };
    add(prefix + "stem.", br.stem);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t blk = 0; blk < br.stages[s].size(); ++blk) {
        const std::string base =
            prefix + "s" + std::to_string(s + 1) + ".b" + std::to_string(blk) + ".";
        auto& rb = br.stages[s][blk];
        add(base + "1.", rb.conv1);
        add(base + "2.", rb.conv2);
        if (rb.has_proj) add(base + "proj.", rb.proj);
      }
  }
};

}  // namespace recapdet
