#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "recapdet/filterbank.hpp"

using namespace recapdet;

namespace {

ImageU8 random_image(int h, int w, Rng& rng) {
  ImageU8 img;
  img.height = h;
  img.width = w;
  img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST_CASE("grayscale coefficients") {
  ImageU8 white = ImageU8::filled(8, 8, 255, 255, 255);
  Eigen::MatrixXd g = to_grayscale(white, 8);
  CHECK(g.minCoeff() == doctest::Approx(1.0));
  CHECK(g.maxCoeff() == doctest::Approx(1.0));

  ImageU8 red = ImageU8::filled(8, 8, 255, 0, 0);
  Eigen::MatrixXd gr = to_grayscale(red, 8);
  CHECK(gr(3, 4) == doctest::Approx(0.299));

  Rng rng(3);
  ImageU8 img = random_image(6, 6, rng);
  Eigen::MatrixXd gray = to_grayscale(img, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const double expect =
          (0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2)) / 255.0;
      CHECK(gray(y, x) == doctest::Approx(expect).epsilon(1e-12));
    }

  ImageU8 empty;
  CHECK_THROWS_AS(to_grayscale(empty, 8), InputError);
}

TEST_CASE("dct2d against direct-sum oracle") {
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(8, 8);
  CHECK(dct2d(zeros).cwiseAbs().maxCoeff() == 0.0);

  // constant image: only the DC coefficient is nonzero
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(8, 8, 0.6);
  Eigen::MatrixXd cf = dct2d(flat);
  CHECK(cf(0, 0) == doctest::Approx(0.6 * 8));
  cf(0, 0) = 0;
  CHECK(cf.cwiseAbs().maxCoeff() <= 1e-12);

  Rng rng(5);
  Eigen::MatrixXd img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img(y, x) = rng.uniform(-1, 1);
  const Eigen::MatrixXd fast = dct2d(img);
  const Eigen::MatrixXd direct = oracles::dct2d_direct(img);
  CHECK((fast - direct).cwiseAbs().maxCoeff() <= 1e-10);

  const Eigen::MatrixXd back = idct2d(fast);
  CHECK((back - img).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((oracles::idct2d_direct(fast) - img).cwiseAbs().maxCoeff() <= 1e-10);

  // Parseval for the orthonormal transform
  CHECK(fast.squaredNorm() == doctest::Approx(img.squaredNorm()).epsilon(1e-12));

  Eigen::MatrixXd rect(4, 6);
  CHECK_THROWS_AS(dct2d(rect), ShapeError);
}

TEST_CASE("band mask arithmetic") {
  BandMasks m = make_band_masks(10, 224);
  CHECK(m.low.sum() == doctest::Approx(55.0));    // k(k+1)/2
  CHECK(m.mid.sum() == doctest::Approx(155.0));   // enumeration of k <= i+j < 2k
  CHECK((m.low + m.mid + m.high).isConstant(1.0));
  CHECK(m.low.sum() + m.mid.sum() + m.high.sum() == doctest::Approx(224.0 * 224.0));
  CHECK(m.low(0, 0) == 1.0);  // DC stays in the low band

  for (int k : {1, 3, 17, 60}) {
    BandMasks mk = make_band_masks(k, 64);
    CHECK((mk.low + mk.mid + mk.high).isConstant(1.0));
    if (k <= 64) CHECK(mk.low.sum() == doctest::Approx(k * (k + 1) / 2.0));
  }

  CHECK_THROWS_AS(make_band_masks(0, 224), ConfigError);
  CHECK_THROWS_AS(make_band_masks(-3, 224), ConfigError);
  CHECK_THROWS_AS(make_band_masks(64, 64), ConfigError);  // empty high band
}

TEST_CASE("filter bank preprocess") {
  // constant input: the DC coefficient lives in the low band
  ImageU8 flat = ImageU8::filled(32, 32, 128, 128, 128);
  BandImage bi = filter_bank_preprocess(flat, 4, 32);
  const double v = 128.0 / 255.0;
  CHECK((bi.channels[0].array() - v).abs().maxCoeff() <= 1e-12);
  CHECK(bi.channels[1].cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(bi.channels[2].cwiseAbs().maxCoeff() <= 1e-12);

  // band sum reconstructs the grayscale (lossless split)
  Rng rng(7);
  ImageU8 img = random_image(40, 40, rng);
  BandImage b2 = filter_bank_preprocess(img, 6, 40);
  Eigen::MatrixXd gray = to_grayscale(img, 40);
  Eigen::MatrixXd sum = b2.channels[0] + b2.channels[1] + b2.channels[2];
  CHECK((sum - gray).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(b2.source_hash == content_hash(img));

  // checkerboard: nearly all non-DC energy lands in the high band
  ImageU8 board = ImageU8::filled(64, 64, 0, 0, 0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if ((x + y) % 2 == 0)
        for (int c = 0; c < 3; ++c) board.at(y, x, c) = 255;
  const Eigen::MatrixXd coeffs = oracles::dct2d_direct(to_grayscale(board, 64));
  BandMasks masks = make_band_masks(10, 64);
  const double dc = coeffs(0, 0) * coeffs(0, 0);
  const double total_ac = coeffs.squaredNorm() - dc;
  const double high = coeffs.cwiseProduct(masks.high).squaredNorm();
  CHECK(high >= 0.99 * total_ac);
}

TEST_CASE("band image file round trip is stable") {
  Rng rng(11);
  ImageU8 img = random_image(24, 24, rng);
  BandImage band = filter_bank_preprocess(img, 5, 24);
  const std::string path = (std::filesystem::temp_directory_path() / "rd_band_test.band").string();
  save_band_image(band, path);
  BandImage loaded = load_band_image(path);
  CHECK(loaded.n == band.n);
  CHECK(loaded.k == band.k);
  CHECK(loaded.source_hash == band.source_hash);
  // float32 quantization happens exactly once: a second round trip is bitwise
  save_band_image(loaded, path);
  BandImage again = load_band_image(path);
  for (int c = 0; c < 3; ++c) {
    CHECK((loaded.channels[c] - band.channels[c]).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((again.channels[c] - loaded.channels[c]).cwiseAbs().maxCoeff() == 0.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("partition/losslessness over random images") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    ImageU8 img = random_image(48, 48, rng);
    BandImage band = filter_bank_preprocess(img, 10, 48);
    Eigen::MatrixXd sum = band.channels[0] + band.channels[1] + band.channels[2];
    CHECK((sum - to_grayscale(img, 48)).cwiseAbs().maxCoeff() <= 1e-4);
  }
}
