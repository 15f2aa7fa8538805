#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace mfldp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probability vector over the r states of a model.
///
/// Construction clips entries in (-1e-12, 0) to zero and renormalizes; any
/// larger negative entry, a non-finite entry, or a zero total is rejected with
/// std::invalid_argument.
class SimplexPoint {
 public:
  SimplexPoint() = default;
  explicit SimplexPoint(Vector weights);
  SimplexPoint(std::initializer_list<double> weights);

  static SimplexPoint uniform(std::size_t r);
  static SimplexPoint vertex(std::size_t r, std::size_t k);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  [[nodiscard]] double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
  [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
  [[nodiscard]] std::span<const double> span() const noexcept {
    return {weights_.data(), static_cast<std::size_t>(weights_.size())};
  }
  [[nodiscard]] bool interior(double margin = 0.0) const;

  friend bool operator==(const SimplexPoint& a, const SimplexPoint& b) {
    return a.weights_.size() == b.weights_.size() && a.weights_ == b.weights_;
  }

 private:
  Vector weights_;
};

[[nodiscard]] double l1_distance(const SimplexPoint& a, const SimplexPoint& b);
[[nodiscard]] double l1_distance(const Vector& a, const Vector& b);

/// Convex combination (1 - s) a + s b.
[[nodiscard]] SimplexPoint lerp(const SimplexPoint& a, const SimplexPoint& b, double s);

/// All compositions of `resolution` into r nonnegative parts, in lexicographic order.
[[nodiscard]] std::vector<std::vector<int>> compositions(std::size_t r, int resolution);

/// The uniform simplex grid {k / resolution : k a composition of resolution}.
[[nodiscard]] std::vector<SimplexPoint> simplex_grid(std::size_t r, int resolution);

/// Number of compositions of n into r parts, C(n + r - 1, r - 1).
[[nodiscard]] std::size_t composition_count(std::size_t r, int n);

/// Orthonormal basis (r x (r-1)) of the tangent space {v : sum(v) = 0}.
[[nodiscard]] Matrix tangent_basis(std::size_t r);

/// Euclidean projection onto {x : x_i >= floor, sum(x) = 1}. Requires r * floor < 1.
[[nodiscard]] Vector project_to_simplex(const Vector& x, double floor = 0.0);

}  // namespace mfldp
