#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "recapdet/errors.hpp"

namespace recapdet {

using MatD = Eigen::MatrixXd;

// Orthonormal DCT-II basis matrix: row u holds alpha(u) * cos(pi*(2x+1)*u/(2n)).
// C * C^T = I, so the inverse transform (DCT-III) is the plain transpose.
inline MatD dct_matrix(int n) {
  if (n < 1) throw ShapeError("dct_matrix: n must be positive");
  MatD c(n, n);
  const double a0 = std::sqrt(1.0 / n);
  const double a = std::sqrt(2.0 / n);
  for (int u = 0; u < n; ++u)
    for (int x = 0; x < n; ++x)
      c(u, x) = (u == 0 ? a0 : a) * std::cos(M_PI * (2.0 * x + 1.0) * u / (2.0 * n));
  return c;
}

// Separable 2D DCT-II, rows then columns: coeffs = C * X * C^T.
inline MatD dct2d(const MatD& gray, const MatD& basis) {
  if (gray.rows() != gray.cols())
    throw ShapeError("dct2d: input must be square, got " + std::to_string(gray.rows()) + "x" +
                     std::to_string(gray.cols()));
  if (basis.rows() != gray.rows()) throw ShapeError("dct2d: basis size mismatch");
  return basis * gray * basis.transpose();
}

inline MatD dct2d(const MatD& gray) { return dct2d(gray, dct_matrix(static_cast<int>(gray.rows()))); }

// Exact inverse of dct2d (orthonormal DCT-III).
inline MatD idct2d(const MatD& coeffs, const MatD& basis) {
  if (coeffs.rows() != coeffs.cols())
    throw ShapeError("idct2d: input must be square, got " + std::to_string(coeffs.rows()) + "x" +
                     std::to_string(coeffs.cols()));
  if (basis.rows() != coeffs.rows()) throw ShapeError("idct2d: basis size mismatch");
  return basis.transpose() * coeffs * basis;
}

inline MatD idct2d(const MatD& coeffs) {
  return idct2d(coeffs, dct_matrix(static_cast<int>(coeffs.rows())));
}

}  // namespace recapdet
