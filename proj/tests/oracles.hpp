#pragma once

// Brute-force reference implementations, written independently of the library
// code paths they check. Everything here favors obviousness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "recapdet/rng.hpp"
#include "recapdet/tensor.hpp"

namespace oracles {

using recapdet::Rng;
using recapdet::Tensor;

// ---------------------------------------------------------------------------
// tensor-op oracles

inline std::vector<double> matmul_triple_loop(const std::vector<double>& a,
                                              const std::vector<double>& b, int m, int k, int n) {
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int t = 0; t < k; ++t)
        out[static_cast<std::size_t>(i) * n + j] +=
            a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
  return out;
}

// direct 6-loop cross-correlation
inline std::vector<double> conv2d_direct(const std::vector<double>& x, int c_in, int h, int w,
                                         const std::vector<double>& kern, int c_out, int kh, int kw,
                                         int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(c_out) * ho * wo, 0.0);
  for (int co = 0; co < c_out; ++co)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (int ci = 0; ci < c_in; ++ci)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * stride - pad + ky;
              const int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x[(static_cast<std::size_t>(ci) * h + iy) * w + ix] *
                     kern[((static_cast<std::size_t>(co) * c_in + ci) * kh + ky) * kw + kx];
            }
        out[(static_cast<std::size_t>(co) * ho + oy) * wo + ox] = acc;
      }
  return out;
}

// align-corners-false sampling, coded from the pixel-center definition
inline std::vector<double> bilinear_direct(const std::vector<double>& x, int c, int h, int w,
                                           int oh, int ow) {
  std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double sy = (oy + 0.5) * static_cast<double>(h) / oh - 0.5;
        double sx = (ox + 0.5) * static_cast<double>(w) / ow - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - y0, fx = sx - x0;
        auto px = [&](int yy, int xx) {
          return x[(static_cast<std::size_t>(ch) * h + yy) * w + xx];
        };
        out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] =
            (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) +
            fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
      }
  return out;
}

inline std::vector<double> maxpool_direct(const std::vector<double>& x, int c, int h, int w,
                                          int window, int stride) {
  const int ho = (h - window) / stride + 1;
  const int wo = (w - window) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double best = -1e300;
        for (int ky = 0; ky < window; ++ky)
          for (int kx = 0; kx < window; ++kx)
            best = std::max(best, x[(static_cast<std::size_t>(ch) * h + oy * stride + ky) * w +
                                    ox * stride + kx]);
        out[(static_cast<std::size_t>(ch) * ho + oy) * wo + ox] = best;
      }
  return out;
}

// ---------------------------------------------------------------------------
// DCT oracle: O(N^4) direct summation of the orthonormal type-II definition

inline Eigen::MatrixXd dct2d_direct(const Eigen::MatrixXd& img) {
  const int n = static_cast<int>(img.rows());
  auto alpha = [n](int u) { return u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); };
  Eigen::MatrixXd out(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      double acc = 0.0;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          acc += img(y, x) * std::cos(M_PI * (2.0 * y + 1.0) * u / (2.0 * n)) *
                 std::cos(M_PI * (2.0 * x + 1.0) * v / (2.0 * n));
      out(u, v) = alpha(u) * alpha(v) * acc;
    }
  return out;
}

inline Eigen::MatrixXd idct2d_direct(const Eigen::MatrixXd& coeffs) {
  const int n = static_cast<int>(coeffs.rows());
  auto alpha = [n](int u) { return u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); };
  Eigen::MatrixXd out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
          acc += alpha(u) * alpha(v) * coeffs(u, v) * std::cos(M_PI * (2.0 * y + 1.0) * u / (2.0 * n)) *
                 std::cos(M_PI * (2.0 * x + 1.0) * v / (2.0 * n));
      out(y, x) = acc;
    }
  return out;
}

// ---------------------------------------------------------------------------
// cross-attention token-loop oracle: explicit loops over spatial tokens,
// channels as embedding, row-major token order (h then w)

inline std::vector<double> cross_attend_token_loop(const std::vector<double>& x,
                                                   const std::vector<double>& y,
                                                   const std::vector<double>& wq,
                                                   const std::vector<double>& wk,
                                                   const std::vector<double>& wv, int c, int h,
                                                   int w, bool scaled = false) {
  const int tokens = h * w;
  auto project = [&](const std::vector<double>& feat, const std::vector<double>& kern) {
    // 1x1 conv: out[t][co] = sum_ci kern[co][ci] * feat[ci at token t]
    std::vector<double> out(static_cast<std::size_t>(tokens) * c, 0.0);
    for (int t = 0; t < tokens; ++t)
      for (int co = 0; co < c; ++co)
        for (int ci = 0; ci < c; ++ci)
          out[static_cast<std::size_t>(t) * c + co] +=
              kern[static_cast<std::size_t>(co) * c + ci] * feat[static_cast<std::size_t>(ci) * tokens + t];
    return out;
  };
  const std::vector<double> q = project(x, wq);
  const std::vector<double> k = project(y, wk);
  const std::vector<double> v = project(y, wv);
  const double temp = scaled ? 1.0 / std::sqrt(static_cast<double>(c)) : 1.0;

  std::vector<double> out(static_cast<std::size_t>(c) * tokens);
  for (int t = 0; t < tokens; ++t) {
    std::vector<double> logits(static_cast<std::size_t>(tokens), 0.0);
    for (int s = 0; s < tokens; ++s) {
      double dot = 0.0;
      for (int ch = 0; ch < c; ++ch)
        dot += q[static_cast<std::size_t>(t) * c + ch] * k[static_cast<std::size_t>(s) * c + ch];
      logits[static_cast<std::size_t>(s)] = dot * temp;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      denom += l;
    }
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int s = 0; s < tokens; ++s)
        acc += (logits[static_cast<std::size_t>(s)] / denom) * v[static_cast<std::size_t>(s) * c + ch];
      out[static_cast<std::size_t>(ch) * tokens + t] = acc + x[static_cast<std::size_t>(ch) * tokens + t];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// metric oracles

inline double accuracy_counting(const std::vector<double>& scores, const std::vector<int>& labels,
                                double thr) {
  int correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= thr ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return 100.0 * correct / static_cast<double>(scores.size());
}

inline double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  return 100.0 * num / static_cast<double>(pairs);
}

inline void far_frr_counting(const std::vector<double>& scores, const std::vector<int>& labels,
                             double thr, double& far, double& frr) {
  int fa = 0, genuine = 0, fr = 0, recaptured = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) {
      ++genuine;
      if (scores[i] >= thr) ++fa;
    } else {
      ++recaptured;
      if (scores[i] < thr) ++fr;
    }
  }
  far = static_cast<double>(fa) / genuine;
  frr = static_cast<double>(fr) / recaptured;
}

inline std::pair<double, double> eer_exhaustive(const std::vector<double>& scores,
                                                const std::vector<int>& labels) {
  std::vector<double> uniq(scores);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> cands;
  cands.push_back(uniq.front() - 1.0);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) cands.push_back((uniq[i] + uniq[i + 1]) / 2.0);
  cands.push_back(uniq.back() + 1.0);
  double best_gap = 1e18, best = 0.0, best_thr = cands[0];
  for (double thr : cands) {
    double far, frr;
    far_frr_counting(scores, labels, thr, far, frr);
    if (std::fabs(far - frr) < best_gap) {
      best_gap = std::fabs(far - frr);
      best = (far + frr) / 2.0;
      best_thr = thr;
    }
  }
  return {100.0 * best, best_thr};
}

// literal PR-curve area via rank summation
inline double ap_pr_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  int total_pos = 0;
  for (int l : labels) total_pos += l;
  double ap = 0.0, prev_recall = 0.0;
  int tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++tp;
      const double recall = static_cast<double>(tp) / total_pos;
      const double precision = static_cast<double>(tp) / static_cast<double>(rank + 1);
      ap += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
  }
  return 100.0 * ap;
}

inline double hter_counting(const std::vector<double>& scores, const std::vector<int>& labels,
                            double thr) {
  double far, frr;
  far_frr_counting(scores, labels, thr, far, frr);
  return 100.0 * (far + frr) / 2.0;
}

// ---------------------------------------------------------------------------
// finite-difference gradient check

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Central differences against the analytic gradients of `inputs`. `forward`
// must rebuild the graph from the same tensors on every call. Large tensors
// can be subsampled via max_elems_per_tensor.
inline GradCheckResult grad_check(const std::function<Tensor<double>()>& forward,
                                  std::vector<Tensor<double>> inputs, double h = 1e-5,
                                  std::size_t max_elems_per_tensor = 0, std::uint64_t seed = 17) {
  for (auto& t : inputs) t.zero_grad();
  Tensor<double> loss = forward();
  recapdet::backward(loss);
  std::vector<recapdet::Vec<double>> analytic;
  for (auto& t : inputs) analytic.push_back(t.grad());

  GradCheckResult res;
  Rng rng(seed);
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    std::vector<std::int64_t> idx(static_cast<std::size_t>(t.size()));
    std::iota(idx.begin(), idx.end(), 0);
    if (max_elems_per_tensor && idx.size() > max_elems_per_tensor) {
      for (std::size_t i = 0; i < max_elems_per_tensor; ++i)
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      idx.resize(max_elems_per_tensor);
    }
    for (std::int64_t j : idx) {
      const double orig = t.data()[j];
      t.data()[j] = orig + h;
      const double f_plus = forward().item();
      t.data()[j] = orig - h;
      const double f_minus = forward().item();
      t.data()[j] = orig;
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[ti][j];
      const double denom = std::max({std::fabs(a), std::fabs(fd), 1.0});
      res.max_rel_err = std::max(res.max_rel_err, std::fabs(a - fd) / denom);
      ++res.checked;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// random tensor helpers

inline Tensor<double> random_tensor(recapdet::Shape shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0, bool requires_grad = false) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

inline recapdet::Vec<double> random_weights(std::int64_t n, Rng& rng) {
  recapdet::Vec<double> w(n);
  for (std::int64_t i = 0; i < n; ++i) w[i] = rng.uniform(0.5, 1.5);
  return w;
}

}  // namespace oracles
