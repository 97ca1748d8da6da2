#include "doctest.h"

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "recapdet/attention.hpp"
#include "recapdet/backbone.hpp"

using namespace recapdet;

namespace {

AttnWeights<double> random_weights_for(int c, Rng& rng) {
  AttnWeights<double> w;
  w.wq = oracles::random_tensor({c, c, 1, 1}, rng, -0.8, 0.8, true);
  w.wk = oracles::random_tensor({c, c, 1, 1}, rng, -0.8, 0.8, true);
  w.wv = oracles::random_tensor({c, c, 1, 1}, rng, -0.8, 0.8, true);
  return w;
}

}  // namespace

TEST_CASE("residual identity under zero value weights is bit-exact") {
  Rng rng(3);
  Tensor<double> x = oracles::random_tensor({2, 3, 3}, rng);
  Tensor<double> y = oracles::random_tensor({2, 3, 3}, rng);
  AttnWeights<double> w = random_weights_for(2, rng);
  w.wv = Tensor<double>::zeros({2, 2, 1, 1}, true);
  Tensor<double> out = cross_attend(x, y, w);
  CHECK(std::memcmp(out.raw(), x.raw(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0);
}

TEST_CASE("single token: softmax over one key is 1") {
  Rng rng(5);
  Tensor<double> x = oracles::random_tensor({3, 1, 1}, rng);
  Tensor<double> y = oracles::random_tensor({3, 1, 1}, rng);
  AttnWeights<double> w = random_weights_for(3, rng);
  Tensor<double> out = cross_attend(x, y, w);
  // out = (y * wv) + x
  for (int co = 0; co < 3; ++co) {
    double v = 0;
    for (int ci = 0; ci < 3; ++ci) v += w.wv.data()[co * 3 + ci] * y.data()[ci];
    CHECK(out.data()[co] == doctest::Approx(v + x.data()[co]).epsilon(1e-14));
  }
}

TEST_CASE("token-loop oracle agreement") {
  for (int seed = 1; seed <= 8; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) * 37);
    const int c = 2, h = 3, w = 3;
    Tensor<double> x = oracles::random_tensor({c, h, w}, rng);
    Tensor<double> y = oracles::random_tensor({c, h, w}, rng);
    AttnWeights<double> wt = random_weights_for(c, rng);
    Tensor<double> out = cross_attend(x, y, wt);
    std::vector<double> xv(x.raw(), x.raw() + x.size()), yv(y.raw(), y.raw() + y.size());
    std::vector<double> wq(wt.wq.raw(), wt.wq.raw() + wt.wq.size());
    std::vector<double> wk(wt.wk.raw(), wt.wk.raw() + wt.wk.size());
    std::vector<double> wv(wt.wv.raw(), wt.wv.raw() + wt.wv.size());
    const auto expect = oracles::cross_attend_token_loop(xv, yv, wq, wk, wv, c, h, w);
    double max_diff = 0;
    for (std::int64_t i = 0; i < out.size(); ++i)
      max_diff = std::max(max_diff, std::fabs(out.data()[i] - expect[static_cast<std::size_t>(i)]));
    CHECK(max_diff <= 1e-10);
  }
}

TEST_CASE("attention rows sum to one") {
  Rng rng(11);
  MatRM<double> q(4, 12), k(4, 12);
  for (int i = 0; i < 48; ++i) {
    q.data()[i] = rng.uniform(-3, 3);
    k.data()[i] = rng.uniform(-3, 3);
  }
  const MatRM<double> scores = detail::attention_scores(q, k, 1.0);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    CHECK(std::fabs(scores.row(r).sum() - 1.0) <= 1e-9);
    CHECK(scores.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("permutation equivariance of pre-residual tokens") {
  Rng rng(13);
  const int c = 3, h = 2, w = 3, tokens = h * w;
  Tensor<double> x = oracles::random_tensor({c, h, w}, rng);
  Tensor<double> y = oracles::random_tensor({c, h, w}, rng);
  AttnWeights<double> wt = random_weights_for(c, rng);

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Tensor<double> xp = Tensor<double>::zeros({c, h, w});
  Tensor<double> yp = Tensor<double>::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int t = 0; t < tokens; ++t) {
      xp.data()[ch * tokens + t] = x.data()[ch * tokens + perm[static_cast<std::size_t>(t)]];
      yp.data()[ch * tokens + t] = y.data()[ch * tokens + perm[static_cast<std::size_t>(t)]];
    }

  Tensor<double> base = cross_attend(x, y, wt);
  Tensor<double> permuted = cross_attend(xp, yp, wt);
  for (int ch = 0; ch < c; ++ch)
    for (int t = 0; t < tokens; ++t) {
      const double pre_base = base.data()[ch * tokens + perm[static_cast<std::size_t>(t)]] -
                              x.data()[ch * tokens + perm[static_cast<std::size_t>(t)]];
      const double pre_perm = permuted.data()[ch * tokens + t] - xp.data()[ch * tokens + t];
      CHECK(pre_perm == doctest::Approx(pre_base).epsilon(1e-12));
    }
}

TEST_CASE("gradients vs finite differences for q/k/v and both inputs") {
  for (int seed = 1; seed <= 5; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) * 41);
    const int c = 2, h = 3, w = 2;
    Tensor<double> x = oracles::random_tensor({c, h, w}, rng, -1, 1, true);
    Tensor<double> y = oracles::random_tensor({c, h, w}, rng, -1, 1, true);
    AttnWeights<double> wt = random_weights_for(c, rng);
    const Vec<double> lossw = oracles::random_weights(c * h * w, rng);
    auto fwd = [&] { return weighted_sum(cross_attend(x, y, wt), lossw); };
    const auto res = oracles::grad_check(fwd, {x, y, wt.wq, wt.wk, wt.wv});
    CHECK(res.max_rel_err <= 1e-4);
  }
}

TEST_CASE("gradient flows in scaled mode too") {
  Rng rng(97);
  const int c = 3, h = 2, w = 2;
  Tensor<double> x = oracles::random_tensor({c, h, w}, rng, -1, 1, true);
  Tensor<double> y = oracles::random_tensor({c, h, w}, rng, -1, 1, true);
  AttnWeights<double> wt = random_weights_for(c, rng);
  const Vec<double> lossw = oracles::random_weights(c * h * w, rng);
  auto fwd = [&] { return weighted_sum(cross_attend(x, y, wt, true), lossw); };
  CHECK(oracles::grad_check(fwd, {x, y, wt.wq, wt.wk, wt.wv}).max_rel_err <= 1e-4);
}

TEST_CASE("batched cross attention equals per-sample") {
  Rng rng(17);
  const int c = 2, h = 3, w = 3;
  Tensor<double> xb = oracles::random_tensor({2, c, h, w}, rng);
  Tensor<double> yb = oracles::random_tensor({2, c, h, w}, rng);
  AttnWeights<double> wt = random_weights_for(c, rng);
  Tensor<double> outb = cross_attend(xb, yb, wt);
  const std::int64_t plane = c * h * w;
  for (int s = 0; s < 2; ++s) {
    Tensor<double> xs = Tensor<double>::zeros({c, h, w});
    Tensor<double> ys = Tensor<double>::zeros({c, h, w});
    for (std::int64_t i = 0; i < plane; ++i) {
      xs.data()[i] = xb.data()[s * plane + i];
      ys.data()[i] = yb.data()[s * plane + i];
    }
    Tensor<double> outs = cross_attend(xs, ys, wt);
    for (std::int64_t i = 0; i < plane; ++i)
      CHECK(outb.data()[s * plane + i] == doctest::Approx(outs.data()[i]).epsilon(1e-14));
  }
}

TEST_CASE("attend_all identity with zero value weights and errors") {
  Rng rng(19);
  ScaleFeatures<double> f;
  std::array<AttnWeights<double>, 3> fwd, rev;
  const std::array<int, 3> cs{2, 3, 4};
  for (int i = 0; i < 3; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    f.x[idx] = oracles::random_tensor({cs[idx], 4, 4}, rng);
    f.y[idx] = oracles::random_tensor({cs[idx], 4, 4}, rng);
    fwd[idx] = random_weights_for(cs[idx], rng);
    rev[idx] = random_weights_for(cs[idx], rng);
    fwd[idx].wv = Tensor<double>::zeros({cs[idx], cs[idx], 1, 1}, true);
    rev[idx].wv = Tensor<double>::zeros({cs[idx], cs[idx], 1, 1}, true);
  }
  AttendedFeatures<double> out = attend_all(f, fwd, rev, 3);
  for (int i = 0; i < 3; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    CHECK(out.xa[idx].shape() == f.x[idx].shape());
    CHECK(out.ya[idx].shape() == f.y[idx].shape());
    for (std::int64_t j = 0; j < f.x[idx].size(); ++j) {
      CHECK(out.xa[idx].data()[j] == f.x[idx].data()[j]);
      CHECK(out.ya[idx].data()[j] == f.y[idx].data()[j]);
    }
  }

  std::array<AttnWeights<double>, 3> missing;  // all undefined
  CHECK_THROWS_AS(attend_all(f, missing, rev, 3), ConfigError);
  CHECK_THROWS_AS(attend_all(f, fwd, rev, 4), ConfigError);

  // shape mismatch between the branches
  Tensor<double> bad = oracles::random_tensor({2, 5, 4}, rng);
  CHECK_THROWS_AS(cross_attend(f.x[0], bad, fwd[0]), InputError);
}
