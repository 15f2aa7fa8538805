#include "mfldp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mfldp {

namespace {
constexpr double kClipTolerance = 1e-12;

void append_compositions(std::size_t r, int remaining, std::vector<int>& prefix,
                         std::vector<std::vector<int>>& out) {
  if (prefix.size() + 1 == r) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    prefix.push_back(k);
    append_compositions(r, remaining - k, prefix, out);
    prefix.pop_back();
  }
}
}  // namespace

SimplexPoint::SimplexPoint(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) {
    throw std::invalid_argument("simplex point needs at least one state");
  }
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w)) {
      throw std::invalid_argument("simplex weight " + std::to_string(i) + " is not finite");
    }
    if (w < -kClipTolerance) {
      throw std::invalid_argument("simplex weight " + std::to_string(i) + " is negative");
    }
    if (w < 0.0) {
      weights_[i] = 0.0;
    }
  }
  const double total = weights_.sum();
  if (total <= 0.0) {
    throw std::invalid_argument("simplex weights sum to zero");
  }
  weights_ /= total;
}

SimplexPoint::SimplexPoint(std::initializer_list<double> weights)
    : SimplexPoint(Vector::Map(weights.begin(), static_cast<Eigen::Index>(weights.size()))) {}

SimplexPoint SimplexPoint::uniform(std::size_t r) {
  return SimplexPoint(Vector::Constant(static_cast<Eigen::Index>(r), 1.0));
}

SimplexPoint SimplexPoint::vertex(std::size_t r, std::size_t k) {
  if (k >= r) {
    throw std::out_of_range("vertex index out of range");
  }
  Vector w = Vector::Zero(static_cast<Eigen::Index>(r));
  w[static_cast<Eigen::Index>(k)] = 1.0;
  return SimplexPoint(std::move(w));
}

bool SimplexPoint::interior(double margin) const {
  return weights_.minCoeff() > margin;
}

double l1_distance(const SimplexPoint& a, const SimplexPoint& b) {
  return l1_distance(a.weights(), b.weights());
}

double l1_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l1_distance: dimension mismatch");
  }
  return (a - b).cwiseAbs().sum();
}

SimplexPoint lerp(const SimplexPoint& a, const SimplexPoint& b, double s) {
  return SimplexPoint((1.0 - s) * a.weights() + s * b.weights());
}

std::vector<std::vector<int>> compositions(std::size_t r, int resolution) {
  if (r == 0 || resolution < 0) {
    throw std::invalid_argument("compositions: need r >= 1 and resolution >= 0");
  }
  std::vector<std::vector<int>> out;
  out.reserve(composition_count(r, resolution));
  std::vector<int> prefix;
  prefix.reserve(r);
  append_compositions(r, resolution, prefix, out);
  return out;
}

std::vector<SimplexPoint> simplex_grid(std::size_t r, int resolution) {
  if (resolution < 1) {
    throw std::invalid_argument("simplex_grid: resolution must be >= 1");
  }
  std::vector<SimplexPoint> grid;
  for (const auto& c : compositions(r, resolution)) {
    Vector w(static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < r; ++i) {
      w[static_cast<Eigen::Index>(i)] = static_cast<double>(c[i]) / resolution;
    }
    grid.emplace_back(std::move(w));
  }
  return grid;
}

std::size_t composition_count(std::size_t r, int n) {
  // C(n + r - 1, r - 1) computed incrementally; exact for the sizes used here.
  std::size_t result = 1;
  for (std::size_t k = 1; k < r; ++k) {
    result = result * (static_cast<std::size_t>(n) + k) / k;
  }
  return result;
}

Matrix tangent_basis(std::size_t r) {
  // Helmert contrasts: column k is orthogonal to the ones vector and to the previous columns.
  const auto n = static_cast<Eigen::Index>(r);
  Matrix basis = Matrix::Zero(n, n - 1);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (Eigen::Index i = 0; i < k; ++i) {
      basis(i, k - 1) = scale;
    }
    basis(k, k - 1) = -static_cast<double>(k) * scale;
  }
  return basis;
}

Vector project_to_simplex(const Vector& x, double floor) {
  const auto n = x.size();
  const double budget = 1.0 - static_cast<double>(n) * floor;
  if (budget <= 0.0) {
    throw std::invalid_argument("project_to_simplex: floor too large for dimension");
  }
  // Project y = x - floor onto {y >= 0, sum y = budget} (sort-based algorithm).
  Vector y = x.array() - floor;
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - budget) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) {
      shift = candidate;
    }
  }
  Vector out = (y.array() - shift).cwiseMax(0.0) + floor;
  return out;
}

}  // namespace mfldp
