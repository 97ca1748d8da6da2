#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "recapdet/errors.hpp"
#include "recapdet/ops.hpp"
#include "recapdet/tensor.hpp"

namespace recapdet {

// Query/key/value projections for one scale and one direction, as 1x1
// convolution kernels [C,C,1,1]. The channel mapping is square so the
// residual "+ x" stays shape-valid.
template <typename S>
struct AttnWeights {
  Tensor<S> wq, wk, wv;

  int channels() const { return wq.defined() ? wq.dim(0) : 0; }
};

// Per-scale feature pairs from the two branches, deepest scale last.
template <typename S>
struct ScaleFeatures {
  std::array<Tensor<S>, 3> x;  // branch1 (filter-bank modality)
  std::array<Tensor<S>, 3> y;  // branch2 (RGB)
};

namespace detail {

// Attention rows for one sample over H*W spatial tokens with channels as the
// embedding, token t = (h*W + w): softmax_rows(Q^T K * temp), an HW x HW
// matrix. q and k are channel-major (C x HW).
template <typename S>
MatRM<S> attention_scores(const MatRM<S>& q, const MatRM<S>& k, S temp) {
  MatRM<S> scores = (q.transpose() * k) * temp;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const S mx = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - mx).exp();
    scores.row(r) /= scores.row(r).sum();
  }
  return scores;
}

}  // namespace detail

// Eq.-faithful cross attention: queries from x, keys/values from y, plus a
// residual connection to x. No temperature by default; `scaled` divides the
// logits by sqrt(C) for stability experiments.
//
// The HW x HW score matrix is never kept on the tape. The backward pass
// recomputes the projections and the softmax from the parent tensors, which
// bounds tape memory at feature-map size even for 56x56 scales.
template <typename S>
Tensor<S> cross_attend(const Tensor<S>& x, const Tensor<S>& y, const AttnWeights<S>& w,
                       bool scaled = false) {
  if (x.shape() != y.shape())
    throw InputError("cross_attend: x " + shape_str(x.shape()) + " vs y " + shape_str(y.shape()));
  int b, c, h, wd;
  split_batched(x.shape(), "cross_attend", b, c, h, wd);
  if (!w.wq.defined() || !w.wk.defined() || !w.wv.defined())
    throw ConfigError("cross_attend: missing q/k/v weights");
  if (w.wq.rank() != 4 || w.wq.dim(0) != c || w.wq.dim(1) != c || w.wq.dim(2) != 1 || w.wq.dim(3) != 1)
    throw InputError("cross_attend: weights must be [C,C,1,1] with C=" + std::to_string(c) +
                     ", got " + shape_str(w.wq.shape()));
  const int hw = h * wd;
  const S temp = scaled ? S(1) / static_cast<S>(std::sqrt(static_cast<double>(c))) : S(1);

  auto compute_qkv = [c, hw](const Vec<S>& wmat, const Vec<S>& feat, int sample) {
    MatRM<S> out(c, hw);
    out.noalias() = as_mat<S>(wmat, c, c) *
                    Eigen::Map<const MatRM<S>>(feat.data() + static_cast<std::int64_t>(sample) * c * hw, c, hw);
    return out;
  };

  Tensor<S> out = Tensor<S>::result(
      x.shape(), {x.node(), y.node(), w.wq.node(), w.wk.node(), w.wv.node()},
      [xn = x.node(), yn = y.node(), qn = w.wq.node(), kn = w.wk.node(), vn = w.wv.node(), b, c,
       hw, temp, compute_qkv](Node<S>& self) {
        for (auto& n : {xn, yn, qn, kn, vn})
          if (n->requires_grad) n->ensure_grad();
        const std::int64_t plane = static_cast<std::int64_t>(c) * hw;
        for (int s = 0; s < b; ++s) {
          const MatRM<S> q = compute_qkv(qn->data, xn->data, s);
          const MatRM<S> k = compute_qkv(kn->data, yn->data, s);
          const MatRM<S> v = compute_qkv(vn->data, yn->data, s);
          const MatRM<S> scores = detail::attention_scores(q, k, temp);

          Eigen::Map<const MatRM<S>> g(self.grad.data() + s * plane, c, hw);
          Eigen::Map<const MatRM<S>> xs(xn->data.data() + s * plane, c, hw);
          Eigen::Map<const MatRM<S>> ys(yn->data.data() + s * plane, c, hw);

          // d(scores) through the softmax, then back to projections
          MatRM<S> dv = scores.transpose() * g.transpose();        // HW x C
          MatRM<S> ds = g.transpose() * v;                         // HW x HW
          for (Eigen::Index r = 0; r < ds.rows(); ++r) {
            const S dot = (ds.row(r).array() * scores.row(r).array()).sum();
            ds.row(r) = scores.row(r).array() * (ds.row(r).array() - dot);
          }
          ds *= temp;
          MatRM<S> dq = k * ds.transpose();                        // C x HW
          MatRM<S> dk = q * ds;                                    // C x HW

          if (xn->requires_grad) {
            Eigen::Map<MatRM<S>> dx(xn->grad.data() + s * plane, c, hw);
            dx.noalias() += as_mat<S>(qn->data, c, c).transpose() * dq;
            dx += g;  // residual
          }
          if (yn->requires_grad) {
            Eigen::Map<MatRM<S>> dy(yn->grad.data() + s * plane, c, hw);
            dy.noalias() += as_mat<S>(kn->data, c, c).transpose() * dk;
            dy.noalias() += as_mat<S>(vn->data, c, c).transpose() * dv.transpose();
          }
          if (qn->requires_grad) as_mat<S>(qn->grad, c, c).noalias() += dq * xs.transpose();
          if (kn->requires_grad) as_mat<S>(kn->grad, c, c).noalias() += dk * ys.transpose();
          if (vn->requires_grad) as_mat<S>(vn->grad, c, c).noalias() += dv.transpose() * ys.transpose();
        }
      });

  const std::int64_t plane = static_cast<std::int64_t>(c) * hw;
  for (int s = 0; s < b; ++s) {
    const MatRM<S> q = compute_qkv(w.wq.data(), x.data(), s);
    const MatRM<S> k = compute_qkv(w.wk.data(), y.data(), s);
    const MatRM<S> v = compute_qkv(w.wv.data(), y.data(), s);
    const MatRM<S> scores = detail::attention_scores(q, k, temp);
    Eigen::Map<MatRM<S>> dst(out.raw() + s * plane, c, hw);
    dst.noalias() = (scores * v.transpose()).transpose();
    dst += Eigen::Map<const MatRM<S>>(x.raw() + s * plane, c, hw);
  }
  return out;
}

// Both directions at every requested scale: X_i^a attends X_i over Y_i with
// the forward weight set, Y_i^a the reverse. `scales` counts from the deepest
// scale (scales=1 touches only index 2).
template <typename S>
struct AttendedFeatures {
  std::array<Tensor<S>, 3> xa, ya;
};

template <typename S>
AttendedFeatures<S> attend_all(const ScaleFeatures<S>& f, const std::array<AttnWeights<S>, 3>& w_fwd,
                               const std::array<AttnWeights<S>, 3>& w_rev, int scales = 3,
                               bool scaled = false) {
  if (scales < 1 || scales > 3) throw ConfigError("attend_all: scales must be in {1,2,3}");
  AttendedFeatures<S> out;
  for (int i = 3 - scales; i < 3; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!f.x[idx].defined() || !f.y[idx].defined())
      throw ConfigError("attend_all: missing features at scale " + std::to_string(i + 1));
    if (!w_fwd[idx].wq.defined() || !w_rev[idx].wq.defined())
      throw ConfigError("attend_all: missing weights at scale " + std::to_string(i + 1));
    out.xa[idx] = cross_attend(f.x[idx], f.y[idx], w_fwd[idx], scaled);
    out.ya[idx] = cross_attend(f.y[idx], f.x[idx], w_rev[idx], scaled);
  }
  return out;
}

}  // namespace recapdet
