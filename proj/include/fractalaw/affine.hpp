#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>

#include "point.hpp"

namespace fractalaw {

namespace detail {

using Mat3 = std::array<double, 9>; // row-major, only the leading d x d block is used

// Largest singular value of the leading d x d block of `a`.
//
// d = 1: |a|. d = 2: closed form from the Frobenius norm and determinant.
// d = 3: power iteration on A^T A, accelerated by repeated squaring so that
// nearly-degenerate top eigenvalues still converge to full precision.
inline double spectral_norm(const Mat3& a, std::size_t d) {
  if (d == 1) return std::abs(a[0]);
  if (d == 2) {
    const double p = a[0], q = a[1], r = a[3], s = a[4];
    const double fro2 = p * p + q * q + r * r + s * s;
    const double det = p * s - q * r;
    const double disc = std::max(0.0, fro2 * fro2 - 4.0 * det * det);
    return std::sqrt(std::max(0.0, 0.5 * (fro2 + std::sqrt(disc))));
  }
  Mat3 b{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) b[3 * i + j] += a[3 * k + i] * a[3 * k + j];

  double scale = 0.0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;

  // M <- (M M) / max|M| converges to a multiple of the projector onto the top
  // eigenspace of B.
  Mat3 m = b;
  for (int it = 0; it < 64; ++it) {
    Mat3 sq{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 3; ++k) sq[3 * i + j] += m[3 * i + k] * m[3 * k + j];
    double mx = 0.0;
    for (double x : sq) mx = std::max(mx, std::abs(x));
    if (mx == 0.0) break;
    for (auto& x : sq) x /= mx;
    m = sq;
  }

  double best = 0.0;
  for (std::size_t col = 0; col < 3; ++col) {
    const double v[3] = {m[col], m[3 + col], m[6 + col]};
    const double vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if (vv == 0.0) continue;
    double vbv = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) vbv += v[i] * b[3 * i + j] * v[j];
    best = std::max(best, vbv / vv);
  }
  return std::sqrt(best);
}

} // namespace detail

// Affine map x -> A x + b on R^d. The Lipschitz ratio is the operator norm of
// A and is exact; maps with ratio >= 1 are representable (only the
// law-level contraction factor is constrained).
class AffineContraction {
public:
  AffineContraction() : AffineContraction(1.0, 0.0) {}

  // One-dimensional map x -> a x + b.
  AffineContraction(double a, double b) : dim_(1), offset_(b) {
    linear_[0] = a + 0.0;
    finish();
  }

  // d-dimensional map from a row-major d x d matrix.
  AffineContraction(std::size_t d, std::span<const double> matrix, const Point& offset)
      : dim_(d), offset_(offset) {
    if (d == 0 || d > kMaxDimension) throw std::invalid_argument("AffineContraction: dimension must be 1, 2 or 3");
    if (matrix.size() != d * d) throw std::invalid_argument("AffineContraction: matrix size must be d*d");
    if (offset.dimension() != d) throw std::invalid_argument("AffineContraction: offset dimension mismatch");
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) linear_[3 * i + j] = matrix[d * i + j] + 0.0;
    finish();
  }

  // x -> ratio * x + offset.
  static AffineContraction scaled_identity(double ratio, const Point& offset) {
    const std::size_t d = offset.dimension();
    std::array<double, 9> m{};
    for (std::size_t i = 0; i < d; ++i) m[d * i + i] = ratio;
    return AffineContraction(d, std::span<const double>(m.data(), d * d), offset);
  }

  std::size_t dimension() const { return dim_; }
  double ratio() const { return ratio_; }
  const Point& offset() const { return offset_; }
  double linear(std::size_t i, std::size_t j) const { return linear_[3 * i + j]; }

  Point operator()(const Point& x) const {
    if (x.dimension() != dim_) throw std::invalid_argument("AffineContraction: dimension mismatch");
    Point y = Point::zero(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      double acc = offset_[i];
      for (std::size_t j = 0; j < dim_; ++j) acc += linear_[3 * i + j] * x[j];
      y[i] = acc + 0.0;
    }
    return y;
  }

  // Unique fixed point of x -> A x + b; requires I - A invertible.
  Point fixed_point() const {
    // Gaussian elimination with partial pivoting on (I - A) x = b.
    const std::size_t d = dim_;
    double m[3][4] = {};
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) m[i][j] = (i == j ? 1.0 : 0.0) - linear_[3 * i + j];
      m[i][3] = offset_[i];
    }
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < d; ++r)
        if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
      if (std::abs(m[piv][c]) < 1e-300) throw std::domain_error("AffineContraction: I - A is singular");
      if (piv != c)
        for (std::size_t k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
      for (std::size_t r = 0; r < d; ++r) {
        if (r == c) continue;
        const double f = m[r][c] / m[c][c];
        for (std::size_t k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
      }
    }
    Point x = Point::zero(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = m[i][3] / m[i][i] + 0.0;
    return x;
  }

  friend bool operator==(const AffineContraction& a, const AffineContraction& b) {
    return a.dim_ == b.dim_ && a.linear_ == b.linear_ && a.offset_ == b.offset_;
  }

private:
  void finish() {
    for (std::size_t i = 0; i < dim_ * dim_; ++i)
      if (!std::isfinite(linear_[3 * (i / dim_) + i % dim_]))
        throw std::invalid_argument("AffineContraction: non-finite linear part");
    offset_.validate();
    ratio_ = detail::spectral_norm(linear_, dim_);
  }

  std::size_t dim_;
  detail::Mat3 linear_{};
  Point offset_;
  double ratio_ = 0.0;
};

inline double lipschitz_ratio(const AffineContraction& s) { return s.ratio(); }

// (outer o inner)(x) = outer(inner(x)).
inline AffineContraction compose(const AffineContraction& outer, const AffineContraction& inner) {
  if (outer.dimension() != inner.dimension()) throw std::invalid_argument("compose: dimension mismatch");
  const std::size_t d = outer.dimension();
  std::array<double, 9> m{};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += outer.linear(i, k) * inner.linear(k, j);
      m[d * i + j] = acc;
    }
  return AffineContraction(d, std::span<const double>(m.data(), d * d), outer(inner.offset()));
}

} // namespace fractalaw
