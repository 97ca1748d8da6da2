#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "recapdet/dct.hpp"
#include "recapdet/errors.hpp"
#include "recapdet/image.hpp"
#include "recapdet/ops.hpp"

namespace recapdet {

// Anti-diagonal band masks over the DCT plane: a cell (i,j) belongs to the
// low band when i+j < k, the middle band when k <= i+j < 2k, and the high
// band otherwise. Indices are zero-based so the DC coefficient (0,0) sits in
// the low band. The three masks partition the plane exactly.
struct BandMasks {
  int k = 10;
  int n = 224;
  Eigen::MatrixXd low, mid, high;
};

inline BandMasks make_band_masks(int k, int n) {
  if (k <= 0) throw ConfigError("make_band_masks: k must be positive, got " + std::to_string(k));
  if (n <= 0) throw ConfigError("make_band_masks: n must be positive");
  if (2 * k > 2 * (n - 1))
    throw ConfigError("make_band_masks: k=" + std::to_string(k) + " leaves an empty high band for n=" +
                      std::to_string(n));
  BandMasks m;
  m.k = k;
  m.n = n;
  m.low = Eigen::MatrixXd::Zero(n, n);
  m.mid = Eigen::MatrixXd::Zero(n, n);
  m.high = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int s = i + j;
      if (s < k)
        m.low(i, j) = 1.0;
      else if (s < 2 * k)
        m.mid(i, j) = 1.0;
      else
        m.high(i, j) = 1.0;
    }
  return m;
}

// The filter-bank modality: band-limited reconstructions ordered
// (low, mid, high). Channels sum back to the grayscale source.
struct BandImage {
  int n = 0;
  int k = 0;
  std::uint64_t source_hash = 0;
  std::vector<Eigen::MatrixXd> channels;  // 3 matrices of n x n
};

// BT.601 luma of an RGB image, scaled to [0,1] and bilinearly resized to
// n x n when the source has a different size.
inline Eigen::MatrixXd to_grayscale(const ImageU8& rgb, int n) {
  if (rgb.empty()) throw InputError("to_grayscale: empty image");
  Eigen::MatrixXd gray(rgb.height, rgb.width);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      gray(y, x) = (0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) + 0.114 * rgb.at(y, x, 2)) / 255.0;
  if (rgb.height == n && rgb.width == n) return gray;

  const BilinearAxis ay = bilinear_axis(rgb.height, n);
  const BilinearAxis ax = bilinear_axis(rgb.width, n);
  Eigen::MatrixXd out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double wy1 = ay.w1[y], wx1 = ax.w1[x];
      out(y, x) = (1 - wy1) * ((1 - wx1) * gray(ay.i0[y], ax.i0[x]) + wx1 * gray(ay.i0[y], ax.i1[x])) +
                  wy1 * ((1 - wx1) * gray(ay.i1[y], ax.i0[x]) + wx1 * gray(ay.i1[y], ax.i1[x]));
    }
  return out;
}

// grayscale -> DCT -> per-band mask -> inverse DCT, concatenated (low, mid,
// high). Bands are not renormalized, so their sum reconstructs the input.
inline BandImage filter_bank_preprocess(const ImageU8& rgb, const BandMasks& masks) {
  const Eigen::MatrixXd gray = to_grayscale(rgb, masks.n);
  const MatD basis = dct_matrix(masks.n);
  const MatD coeffs = dct2d(gray, basis);
  BandImage out;
  out.n = masks.n;
  out.k = masks.k;
  out.source_hash = content_hash(rgb);
  out.channels.push_back(idct2d(coeffs.cwiseProduct(masks.low), basis));
  out.channels.push_back(idct2d(coeffs.cwiseProduct(masks.mid), basis));
  out.channels.push_back(idct2d(coeffs.cwiseProduct(masks.high), basis));
  return out;
}

inline BandImage filter_bank_preprocess(const ImageU8& rgb, int k, int n = 224) {
  return filter_bank_preprocess(rgb, make_band_masks(k, n));
}

// Band file round trip (32-bit float payload) and the 8-bit visualization
// triptych; implemented in src/band_io.cpp. Layout is documented there.
void save_band_image(const BandImage& band, const std::string& path);
BandImage load_band_image(const std::string& path);
void save_band_triptych_png(const BandImage& band, const std::string& path);

}  // namespace recapdet
