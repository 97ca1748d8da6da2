#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "recapdet/errors.hpp"
#include "recapdet/tensor.hpp"

namespace recapdet {

// ---------------------------------------------------------------------------
// helpers

template <typename S>
Eigen::Map<MatRM<S>> as_mat(Vec<S>& v, int rows, int cols) {
  return Eigen::Map<MatRM<S>>(v.data(), rows, cols);
}

template <typename S>
Eigen::Map<const MatRM<S>> as_mat(const Vec<S>& v, int rows, int cols) {
  return Eigen::Map<const MatRM<S>>(v.data(), rows, cols);
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Split a 3d [C,H,W] or 4d [B,C,H,W] shape into batch + chw.
inline void split_batched(const Shape& s, const char* op, int& b, int& c, int& h, int& w) {
  if (s.size() == 3) {
    b = 1, c = s[0], h = s[1], w = s[2];
  } else if (s.size() == 4) {
    b = s[0], c = s[1], h = s[2], w = s[3];
  } else {
    throw ShapeError(std::string(op) + ": expected [C,H,W] or [B,C,H,W], got " + shape_str(s));
  }
}

inline Shape with_chw(const Shape& in, int c, int h, int w) {
  if (in.size() == 3) return {c, h, w};
  return {in[0], c, h, w};
}

// ---------------------------------------------------------------------------
// elementwise / reductions

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::result(
      a.shape(), {a.node(), b.node()}, [an = a.node(), bn = b.node()](Node<S>& self) {
        if (an->requires_grad) { an->ensure_grad(); an->grad += self.grad; }
        if (bn->requires_grad) { bn->ensure_grad(); bn->grad += self.grad; }
      });
  out.data() = a.data() + b.data();
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::result(
      a.shape(), {a.node(), b.node()}, [an = a.node(), bn = b.node()](Node<S>& self) {
        if (an->requires_grad) { an->ensure_grad(); an->grad += self.grad * bn->data; }
        if (bn->requires_grad) { bn->ensure_grad(); bn->grad += self.grad * an->data; }
      });
  out.data() = a.data() * b.data();
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Tensor<S> out = Tensor<S>::result(a.shape(), {a.node()}, [an = a.node(), factor](Node<S>& self) {
    an->ensure_grad();
    an->grad += self.grad * factor;
  });
  out.data() = a.data() * factor;
  return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  Tensor<S> out = Tensor<S>::result(a.shape(), {a.node()}, [an = a.node()](Node<S>& self) {
    an->ensure_grad();
    an->grad += self.grad * (an->data > S(0)).template cast<S>();
  });
  out.data() = a.data().max(S(0));
  return out;
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
  Tensor<S> out = Tensor<S>::result({1}, {a.node()}, [an = a.node()](Node<S>& self) {
    an->ensure_grad();
    an->grad += self.grad[0];
  });
  out.data()[0] = a.data().sum();
  return out;
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
  return scale(sum_all(a), S(1) / static_cast<S>(a.size()));
}

// Scalar loss <w, x> against a fixed weighting; handy for probing gradients.
template <typename S>
Tensor<S> weighted_sum(const Tensor<S>& a, const Vec<S>& weights) {
  if (weights.size() != a.size())
    throw DimensionError("weighted_sum: weight length " + std::to_string(weights.size()) +
                         " vs tensor " + shape_str(a.shape()));
  Tensor<S> out = Tensor<S>::result({1}, {a.node()}, [an = a.node(), weights](Node<S>& self) {
    an->ensure_grad();
    an->grad += self.grad[0] * weights;
  });
  out.data()[0] = (a.data() * weights).sum();
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  Tensor<S> out = Tensor<S>::result(std::move(shape), {a.node()}, [an = a.node()](Node<S>& self) {
    an->ensure_grad();
    an->grad += self.grad;
  });
  out.data() = a.data();
  return out;
}

// ---------------------------------------------------------------------------
// matmul / linear

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<S> out = Tensor<S>::result(
      {m, n}, {a.node(), b.node()}, [an = a.node(), bn = b.node(), m, k, n](Node<S>& self) {
        auto g = as_mat<S>(self.grad, m, n);
        if (an->requires_grad) {
          an->ensure_grad();
          as_mat<S>(an->grad, m, k).noalias() += g * as_mat<S>(bn->data, k, n).transpose();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          as_mat<S>(bn->grad, k, n).noalias() += as_mat<S>(an->data, m, k).transpose() * g;
        }
      });
  as_mat<S>(out.data(), m, n).noalias() = as_mat<S>(a.data(), m, k) * as_mat<S>(b.data(), k, n);
  return out;
}

// y = x w^T + b with x:[B,in], w:[out,in], b:[out]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw DimensionError("linear: " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  if (b.rank() != 1 || b.dim(0) != w.dim(0))
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " vs weight " +
                         shape_str(w.shape()));
  const int batch = x.dim(0), in = x.dim(1), outf = w.dim(0);
  Tensor<S> out = Tensor<S>::result(
      {batch, outf}, {x.node(), w.node(), b.node()},
      [xn = x.node(), wn = w.node(), bn = b.node(), batch, in, outf](Node<S>& self) {
        auto g = as_mat<S>(self.grad, batch, outf);
        if (xn->requires_grad) {
          xn->ensure_grad();
          as_mat<S>(xn->grad, batch, in).noalias() += g * as_mat<S>(wn->data, outf, in);
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          as_mat<S>(wn->grad, outf, in).noalias() +=
              g.transpose() * as_mat<S>(xn->data, batch, in);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad += g.colwise().sum().transpose().array();
        }
      });
  as_mat<S>(out.data(), batch, outf).noalias() =
      as_mat<S>(x.data(), batch, in) * as_mat<S>(w.data(), outf, in).transpose();
  as_mat<S>(out.data(), batch, outf).rowwise() +=
      as_mat<S>(b.data(), 1, outf).row(0);
  return out;
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, no kernel flip) via im2col + GEMM

template <typename S>
void im2col(const S* x, int c_in, int h, int w, int kh, int kw, int stride, int pad, int ho,
            int wo, S* col) {
  // col is (c_in*kh*kw) x (ho*wo), row-major
  const int plane = h * w;
  for (int c = 0; c < c_in; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        S* row = col + static_cast<std::int64_t>((c * kh + ki) * kw + kj) * (ho * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * wo, row + (oy + 1) * wo, S(0));
            continue;
          }
          const S* src = x + c * plane + iy * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kj;
            row[oy * wo + ox] = (ix >= 0 && ix < w) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* col, int c_in, int h, int w, int kh, int kw, int stride, int pad, int ho,
                int wo, S* dx) {
  const int plane = h * w;
  for (int c = 0; c < c_in; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const S* row = col + static_cast<std::int64_t>((c * kh + ki) * kw + kj) * (ho * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) continue;
          S* dst = dx + c * plane + iy * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, int stride = 1, int padding = 0) {
  int b, c_in, h, wd;
  split_batched(x.shape(), "conv2d", b, c_in, h, wd);
  if (w.rank() != 4)
    throw ShapeError("conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
  const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c_in)
    throw DimensionError("conv2d: input channels " + shape_str(x.shape()) + " vs weight " +
                         shape_str(w.shape()));
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (kh > h + 2 * padding || kw > wd + 2 * padding)
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " exceeds padded input " +
                     shape_str(x.shape()));
  const int ho = conv_out_dim(h, kh, stride, padding);
  const int wo = conv_out_dim(wd, kw, stride, padding);
  if (ho <= 0 || wo <= 0)
    throw ShapeError("conv2d: non-positive output dims for input " + shape_str(x.shape()));

  const int kdim = c_in * kh * kw;
  const std::int64_t in_plane = static_cast<std::int64_t>(c_in) * h * wd;
  const std::int64_t out_plane = static_cast<std::int64_t>(c_out) * ho * wo;

  Tensor<S> out = Tensor<S>::result(
      with_chw(x.shape(), c_out, ho, wo), {x.node(), w.node()},
      [xn = x.node(), wn = w.node(), b, c_in, h, wd, c_out, kh, kw, stride, padding, ho, wo, kdim,
       in_plane, out_plane](Node<S>& self) {
        Vec<S> col(static_cast<std::int64_t>(kdim) * ho * wo);
        Vec<S> dcol;
        if (xn->requires_grad) {
          xn->ensure_grad();
          dcol.resize(col.size());
        }
        if (wn->requires_grad) wn->ensure_grad();
        auto wmat = as_mat<S>(wn->data, c_out, kdim);
        for (int s = 0; s < b; ++s) {
          // col is recomputed rather than kept from the forward pass; it is
          // the single largest conv buffer and cheap to rebuild.
          im2col(xn->data.data() + s * in_plane, c_in, h, wd, kh, kw, stride, padding, ho, wo,
                 col.data());
          auto g = as_mat<S>(self.grad, b * c_out, ho * wo).middleRows(s * c_out, c_out);
          if (wn->requires_grad) {
            as_mat<S>(wn->grad, c_out, kdim).noalias() +=
                g * as_mat<S>(col, kdim, ho * wo).transpose();
          }
          if (xn->requires_grad) {
            as_mat<S>(dcol, kdim, ho * wo).noalias() = wmat.transpose() * g;
            col2im_add(dcol.data(), c_in, h, wd, kh, kw, stride, padding, ho, wo,
                       xn->grad.data() + s * in_plane);
          }
        }
      });

  Vec<S> col(static_cast<std::int64_t>(kdim) * ho * wo);
  for (int s = 0; s < b; ++s) {
    im2col(x.raw() + s * in_plane, c_in, h, wd, kh, kw, stride, padding, ho, wo, col.data());
    as_mat<S>(out.data(), b * c_out, ho * wo).middleRows(s * c_out, c_out).noalias() =
        as_mat<S>(w.data(), c_out, kdim) * as_mat<S>(col, kdim, ho * wo);
  }
  return out;
}

// ---------------------------------------------------------------------------
// pooling / resize

template <typename S>
Tensor<S> maxpool2d(const Tensor<S>& x, int window, int stride) {
  int b, c, h, w;
  split_batched(x.shape(), "maxpool2d", b, c, h, w);
  if (window < 1 || stride < 1) throw ConfigError("maxpool2d: window and stride must be >= 1");
  if (window > h || window > w)
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " larger than input " +
                     shape_str(x.shape()));
  const int ho = (h - window) / stride + 1;
  const int wo = (w - window) / stride + 1;

  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(b) * c * ho * wo);
  Tensor<S> out = Tensor<S>::result(
      with_chw(x.shape(), c, ho, wo), {x.node()}, [xn = x.node(), argmax](Node<S>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < argmax->size(); ++i)
          xn->grad[(*argmax)[i]] += self.grad[static_cast<std::int64_t>(i)];
      });

  const S* src = x.raw();
  S* dst = out.raw();
  std::int64_t o = 0;
  for (int pc = 0; pc < b * c; ++pc) {
    const std::int64_t base = static_cast<std::int64_t>(pc) * h * w;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox, ++o) {
        std::int64_t best = base + (oy * stride) * w + ox * stride;
        S bv = src[best];
        for (int ky = 0; ky < window; ++ky) {
          const std::int64_t rb = base + (oy * stride + ky) * w + ox * stride;
          for (int kx = 0; kx < window; ++kx) {
            if (src[rb + kx] > bv) { bv = src[rb + kx]; best = rb + kx; }
          }
        }
        dst[o] = bv;
        (*argmax)[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return out;
}

template <typename S>
Tensor<S> avgpool_global(const Tensor<S>& x) {
  int b, c, h, w;
  split_batched(x.shape(), "avgpool_global", b, c, h, w);
  const int plane = h * w;
  Shape out_shape = x.rank() == 3 ? Shape{c} : Shape{b, c};
  Tensor<S> out = Tensor<S>::result(
      out_shape, {x.node()}, [xn = x.node(), b, c, plane](Node<S>& self) {
        xn->ensure_grad();
        const S inv = S(1) / static_cast<S>(plane);
        for (int pc = 0; pc < b * c; ++pc)
          xn->grad.segment(static_cast<std::int64_t>(pc) * plane, plane) += self.grad[pc] * inv;
      });
  for (int pc = 0; pc < b * c; ++pc)
    out.data()[pc] = x.data().segment(static_cast<std::int64_t>(pc) * plane, plane).mean();
  return out;
}

// Sampling tables for align-corners-false bilinear interpolation.
struct BilinearAxis {
  std::vector<int> i0, i1;
  std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

inline BilinearAxis bilinear_axis(int in, int out) {
  BilinearAxis ax;
  ax.i0.resize(out);
  ax.i1.resize(out);
  ax.w1.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * ratio - 0.5;
    if (s < 0) s = 0;
    if (s > in - 1) s = in - 1;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 > in - 1) i0 = in - 1;
    ax.i0[o] = i0;
    ax.i1[o] = std::min(i0 + 1, in - 1);
    ax.w1[o] = s - i0;
  }
  return ax;
}

template <typename S>
Tensor<S> bilinear_resize(const Tensor<S>& x, int out_h, int out_w) {
  int b, c, h, w;
  split_batched(x.shape(), "bilinear_resize", b, c, h, w);
  if (out_h < 1 || out_w < 1)
    throw ShapeError("bilinear_resize: non-positive target " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  auto ay = std::make_shared<BilinearAxis>(bilinear_axis(h, out_h));
  auto ax = std::make_shared<BilinearAxis>(bilinear_axis(w, out_w));

  Tensor<S> out = Tensor<S>::result(
      with_chw(x.shape(), c, out_h, out_w), {x.node()},
      [xn = x.node(), ay, ax, b, c, h, w, out_h, out_w](Node<S>& self) {
        xn->ensure_grad();
        for (int pc = 0; pc < b * c; ++pc) {
          const std::int64_t ib = static_cast<std::int64_t>(pc) * h * w;
          const std::int64_t ob = static_cast<std::int64_t>(pc) * out_h * out_w;
          for (int oy = 0; oy < out_h; ++oy) {
            const S wy1 = static_cast<S>(ay->w1[oy]), wy0 = S(1) - wy1;
            for (int ox = 0; ox < out_w; ++ox) {
              const S wx1 = static_cast<S>(ax->w1[ox]), wx0 = S(1) - wx1;
              const S g = self.grad[ob + oy * out_w + ox];
              xn->grad[ib + ay->i0[oy] * w + ax->i0[ox]] += g * wy0 * wx0;
              xn->grad[ib + ay->i0[oy] * w + ax->i1[ox]] += g * wy0 * wx1;
              xn->grad[ib + ay->i1[oy] * w + ax->i0[ox]] += g * wy1 * wx0;
              xn->grad[ib + ay->i1[oy] * w + ax->i1[ox]] += g * wy1 * wx1;
            }
          }
        }
      });

  const S* src = x.raw();
  S* dst = out.raw();
  for (int pc = 0; pc < b * c; ++pc) {
    const std::int64_t ib = static_cast<std::int64_t>(pc) * h * w;
    const std::int64_t ob = static_cast<std::int64_t>(pc) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const S wy1 = static_cast<S>(ay->w1[oy]), wy0 = S(1) - wy1;
      const S* r0 = src + ib + ay->i0[oy] * w;
      const S* r1 = src + ib + ay->i1[oy] * w;
      for (int ox = 0; ox < out_w; ++ox) {
        const S wx1 = static_cast<S>(ax->w1[ox]), wx0 = S(1) - wx1;
        dst[ob + oy * out_w + ox] = wy0 * (wx0 * r0[ax->i0[ox]] + wx1 * r0[ax->i1[ox]]) +
                                    wy1 * (wx0 * r1[ax->i0[ox]] + wx1 * r1[ax->i1[ox]]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch norm

enum class BnMode { Train, Eval };

template <typename S>
struct BnStats {
  Vec<S> running_mean;
  Vec<S> running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);

  static BnStats make(int features, S momentum = S(0.1), S eps = S(1e-5)) {
    BnStats st;
    st.running_mean = Vec<S>::Zero(features);
    st.running_var = Vec<S>::Ones(features);
    st.momentum = momentum;
    st.eps = eps;
    return st;
  }
};

// Normalizes per-channel over (B,H,W) for 4d input or per-feature over B for
// 2d input. Train mode uses batch statistics (biased variance) and updates the
// running stats in place; eval mode reads the running stats.
template <typename S>
Tensor<S> batchnorm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                    BnStats<S>& stats, BnMode mode) {
  int b, c, h, w;
  if (x.rank() == 2) {
    b = x.dim(0), c = x.dim(1), h = 1, w = 1;
  } else {
    split_batched(x.shape(), "batchnorm", b, c, h, w);
  }
  if (gamma.size() != c || beta.size() != c)
    throw DimensionError("batchnorm: gamma/beta " + shape_str(gamma.shape()) + " vs channels " +
                         std::to_string(c));
  if (stats.running_mean.size() != c)
    throw ConfigError("batchnorm: running stats sized " +
                      std::to_string(stats.running_mean.size()) + " for " + std::to_string(c) +
                      " channels");
  const std::int64_t n = static_cast<std::int64_t>(b) * h * w;  // elements per channel
  if (mode == BnMode::Train && b < 2)
    throw ConfigError("batchnorm: train mode requires batch >= 2, got " + std::to_string(b));

  const int plane = h * w;
  auto channel_seg = [&](const Vec<S>& v, int s, int ch) {
    return v.segment((static_cast<std::int64_t>(s) * c + ch) * plane, plane);
  };

  Vec<S> mean(c), invstd(c);
  if (mode == BnMode::Train) {
    for (int ch = 0; ch < c; ++ch) {
      S m = 0, sq = 0;
      for (int s = 0; s < b; ++s) {
        m += channel_seg(x.data(), s, ch).sum();
        sq += channel_seg(x.data(), s, ch).square().sum();
      }
      m /= static_cast<S>(n);
      S var = sq / static_cast<S>(n) - m * m;
      if (var < S(0)) var = S(0);
      mean[ch] = m;
      invstd[ch] = S(1) / std::sqrt(var + stats.eps);
      stats.running_mean[ch] = (S(1) - stats.momentum) * stats.running_mean[ch] + stats.momentum * m;
      const S unbiased = n > 1 ? var * static_cast<S>(n) / static_cast<S>(n - 1) : var;
      stats.running_var[ch] = (S(1) - stats.momentum) * stats.running_var[ch] + stats.momentum * unbiased;
    }
  } else {
    mean = stats.running_mean;
    invstd = (stats.running_var + stats.eps).sqrt().inverse();
  }

  // xhat is kept for the backward pass (train mode needs its batch moments).
  auto xhat = std::make_shared<Vec<S>>(x.size());
  for (int s = 0; s < b; ++s)
    for (int ch = 0; ch < c; ++ch)
      xhat->segment((static_cast<std::int64_t>(s) * c + ch) * plane, plane) =
          (channel_seg(x.data(), s, ch) - mean[ch]) * invstd[ch];

  const bool train = mode == BnMode::Train;
  Tensor<S> out = Tensor<S>::result(
      x.shape(), {x.node(), gamma.node(), beta.node()},
      [xn = x.node(), gn = gamma.node(), btn = beta.node(), xhat, invstd, b, c, plane, n,
       train](Node<S>& self) {
        for (int ch = 0; ch < c; ++ch) {
          S sum_g = 0, sum_gx = 0;
          for (int s = 0; s < b; ++s) {
            const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * plane;
            sum_g += self.grad.segment(off, plane).sum();
            sum_gx += (self.grad.segment(off, plane) * xhat->segment(off, plane)).sum();
          }
          if (gn->requires_grad) { gn->ensure_grad(); gn->grad[ch] += sum_gx; }
          if (btn->requires_grad) { btn->ensure_grad(); btn->grad[ch] += sum_g; }
          if (xn->requires_grad) {
            xn->ensure_grad();
            const S gch = gn->data[ch];
            if (train) {
              const S mg = sum_g / static_cast<S>(n);
              const S mgx = sum_gx / static_cast<S>(n);
              for (int s = 0; s < b; ++s) {
                const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * plane;
                xn->grad.segment(off, plane) +=
                    gch * invstd[ch] *
                    (self.grad.segment(off, plane) - mg - xhat->segment(off, plane) * mgx);
              }
            } else {
              for (int s = 0; s < b; ++s) {
                const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * plane;
                xn->grad.segment(off, plane) += gch * invstd[ch] * self.grad.segment(off, plane);
              }
            }
          }
        }
      });

  for (int s = 0; s < b; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * plane;
      out.data().segment(off, plane) =
          gamma.data()[ch] * xhat->segment(off, plane) + beta.data()[ch];
    }
  return out;
}

// ---------------------------------------------------------------------------
// softmax / cross entropy

template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: expected [m,n], got " + shape_str(x.shape()));
  if (!x.data().isFinite().all())
    throw NumericError("softmax_rows: non-finite input");
  const int m = x.dim(0), n = x.dim(1);
  Tensor<S> out = Tensor<S>::result({m, n}, {x.node()}, [xn = x.node(), m, n](Node<S>& self) {
    xn->ensure_grad();
    auto y = as_mat<S>(self.data, m, n);
    auto g = as_mat<S>(self.grad, m, n);
    auto dx = as_mat<S>(xn->grad, m, n);
    for (int r = 0; r < m; ++r) {
      const S dot = (g.row(r).array() * y.row(r).array()).sum();
      dx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
  auto xin = as_mat<S>(x.data(), m, n);
  auto y = as_mat<S>(out.data(), m, n);
  for (int r = 0; r < m; ++r) {
    const S mx = xin.row(r).maxCoeff();
    y.row(r) = (xin.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return out;
}

// Mean over the batch of -log softmax probability of the true class.
// Labels follow the 0 = genuine, 1 = recaptured convention.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw ShapeError("cross_entropy: expected [B,K] logits, got " + shape_str(logits.shape()));
  const int batch = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw InputError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw InputError("cross_entropy: label " + std::to_string(lab) + " outside [0," +
                       std::to_string(k) + ")");

  auto probs = std::make_shared<Vec<S>>(logits.size());
  auto z = as_mat<S>(logits.data(), batch, k);
  S total = 0;
  for (int r = 0; r < batch; ++r) {
    const S mx = z.row(r).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (z.row(r).array() - mx).exp();
    const S denom = e.sum();
    for (int j = 0; j < k; ++j) (*probs)[r * k + j] = e[j] / denom;
    total += mx + std::log(denom) - z(r, labels[static_cast<std::size_t>(r)]);
  }

  Tensor<S> out = Tensor<S>::result(
      {1}, {logits.node()}, [ln = logits.node(), probs, labels, batch, k](Node<S>& self) {
        ln->ensure_grad();
        const S g = self.grad[0] / static_cast<S>(batch);
        for (int r = 0; r < batch; ++r)
          for (int j = 0; j < k; ++j)
            ln->grad[r * k + j] +=
                g * ((*probs)[r * k + j] - (labels[static_cast<std::size_t>(r)] == j ? S(1) : S(0)));
      });
  out.data()[0] = total / static_cast<S>(batch);
  return out;
}

// ---------------------------------------------------------------------------
// channel concatenation

template <typename S>
Tensor<S> concat_channels(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw InputError("concat_channels: no inputs");
  int b0, c0, h0, w0;
  split_batched(parts[0].shape(), "concat_channels", b0, c0, h0, w0);
  int c_total = 0;
  std::vector<NodePtr<S>> nodes;
  for (const auto& p : parts) {
    int b, c, h, w;
    split_batched(p.shape(), "concat_channels", b, c, h, w);
    if (b != b0 || h != h0 || w != w0 || p.rank() != parts[0].rank())
      throw DimensionError("concat_channels: " + shape_str(p.shape()) + " vs " +
                           shape_str(parts[0].shape()));
    c_total += c;
    nodes.push_back(p.node());
  }
  const int plane = h0 * w0;
  Tensor<S> out = Tensor<S>::result(
      with_chw(parts[0].shape(), c_total, h0, w0), nodes,
      [nodes, b0, c_total, plane](Node<S>& self) {
        for (int s = 0; s < b0; ++s) {
          std::int64_t off = static_cast<std::int64_t>(s) * c_total * plane;
          for (const auto& n : nodes) {
            const std::int64_t len = n->data.size() / b0;
            if (n->requires_grad) {
              n->ensure_grad();
              n->grad.segment(s * len, len) += self.grad.segment(off, len);
            }
            off += len;
          }
        }
      });
  for (int s = 0; s < b0; ++s) {
    std::int64_t off = static_cast<std::int64_t>(s) * c_total * plane;
    for (const auto& p : parts) {
      const std::int64_t len = p.size() / b0;
      out.data().segment(off, len) = p.data().segment(s * len, len);
      off += len;
    }
  }
  return out;
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  return concat_channels(std::vector<Tensor<S>>{a, b});
}

}  // namespace recapdet
