#include "mfldp/legendre.hpp"

#include <cmath>
#include <limits>

namespace mfldp {

namespace {

constexpr double kSeriesCutoff = 1e-3;

}  // namespace

double tau(double u) noexcept {
  if (std::abs(u) < kSeriesCutoff) {
    // sum_{n >= 2} u^n / n!
    double term = u * u / 2.0;
    double sum = 0.0;
    for (int n = 2; n < 10; ++n) {
      sum += term;
      term *= u / (n + 1);
    }
    return sum;
  }
  return std::expm1(u) - u;
}

double tau_star(double u) noexcept {
  if (std::isnan(u)) {
    return u;
  }
  if (u < -1.0) {
    return std::numeric_limits<double>::infinity();
  }
  if (u == -1.0) {
    return 1.0;
  }
  if (std::isinf(u)) {
    return u;
  }
  if (std::abs(u) < kSeriesCutoff) {
    // sum_{n >= 2} (-1)^n u^n / (n (n - 1))
    double power = u * u;
    double sum = 0.0;
    for (int n = 2; n < 10; ++n) {
      sum += power / (n * (n - 1.0));
      power *= -u;
    }
    return sum;
  }
  return (u + 1.0) * std::log1p(u) - u;
}

double tau_star_of_tilt(double x) noexcept {
  if (x == -std::numeric_limits<double>::infinity()) {
    return 1.0;
  }
  return tau_star(std::expm1(x));
}

}  // namespace mfldp
