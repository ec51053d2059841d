#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace fractalaw {

inline constexpr std::size_t kMaxDimension = 3;

// A point of R^d, 1 <= d <= 3. Unused trailing coordinates are kept at +0.0
// so that value comparison and hashing can look at the whole array.
struct Point {
  std::array<double, kMaxDimension> coords{};
  std::uint8_t dim = 1;

  Point() = default;

  explicit Point(double x) : coords{x + 0.0, 0.0, 0.0}, dim(1) { validate(); }

  Point(std::initializer_list<double> xs) {
    if (xs.size() == 0 || xs.size() > kMaxDimension)
      throw std::invalid_argument("Point: dimension must be 1, 2 or 3");
    dim = static_cast<std::uint8_t>(xs.size());
    std::size_t i = 0;
    for (double x : xs) coords[i++] = x + 0.0; // folds -0.0 into +0.0
    validate();
  }

  static Point zero(std::size_t d) {
    if (d == 0 || d > kMaxDimension) throw std::invalid_argument("Point: dimension must be 1, 2 or 3");
    Point p;
    p.dim = static_cast<std::uint8_t>(d);
    return p;
  }

  std::size_t dimension() const { return dim; }
  double operator[](std::size_t i) const { return coords[i]; }
  double& operator[](std::size_t i) { return coords[i]; }

  void validate() const {
    for (std::size_t i = 0; i < dim; ++i)
      if (!std::isfinite(coords[i])) throw std::invalid_argument("Point: non-finite coordinate");
  }

  // +0.0 for -0.0 so that == after canonicalization coincides with bit equality.
  void normalize_zeros() {
    for (auto& c : coords) c += 0.0;
  }

  friend bool operator==(const Point& a, const Point& b) {
    return a.dim == b.dim && a.coords == b.coords;
  }
  friend bool operator<(const Point& a, const Point& b) {
    for (std::size_t i = 0; i < a.dim; ++i) {
      if (a.coords[i] < b.coords[i]) return true;
      if (b.coords[i] < a.coords[i]) return false;
    }
    return false;
  }
};

// Norm used for d(x, y) on R^d. All three coincide with |x - y| in one dimension.
enum class Norm { euclidean, manhattan, chebyshev };

inline double distance(const Point& a, const Point& b, Norm norm = Norm::euclidean) {
  if (a.dim != b.dim) throw std::invalid_argument("distance: dimension mismatch");
  if (a.dim == 1) return std::abs(a.coords[0] - b.coords[0]);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.dim; ++i) {
    const double d = std::abs(a.coords[i] - b.coords[i]);
    switch (norm) {
      case Norm::euclidean: acc += d * d; break;
      case Norm::manhattan: acc += d; break;
      case Norm::chebyshev: acc = std::max(acc, d); break;
    }
  }
  return norm == Norm::euclidean ? std::sqrt(acc) : acc;
}

inline std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::euclidean: return "euclidean";
    case Norm::manhattan: return "manhattan";
    case Norm::chebyshev: return "chebyshev";
  }
  return "euclidean";
}

inline Norm norm_from_string(const std::string& s) {
  if (s == "euclidean") return Norm::euclidean;
  if (s == "manhattan") return Norm::manhattan;
  if (s == "chebyshev") return Norm::chebyshev;
  throw std::invalid_argument("unknown norm '" + s + "'");
}

} // namespace fractalaw
