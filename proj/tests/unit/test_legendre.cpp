#include "mfldp/legendre.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace mfldp;
using Catch::Approx;

namespace {

// sup_v (u v - tau(v)) over a uniform grid on [-10, 10].
double grid_conjugate(double u) {
  double best = -std::numeric_limits<double>::infinity();
  constexpr int n = 40000;
  for (int k = 0; k <= n; ++k) {
    const double v = -10.0 + 20.0 * k / n;
    best = std::max(best, u * v - (std::exp(v) - v - 1.0));
  }
  return best;
}

}  // namespace

TEST_CASE("tau_star special values", "[legendre]") {
  CHECK(tau_star(0.0) == 0.0);
  CHECK(tau_star(-1.0) == 1.0);
  CHECK(tau_star(std::numbers::e - 1.0) == Approx(1.0).epsilon(1e-14));
  CHECK(std::isinf(tau_star(-1.0000001)));
  CHECK(std::isinf(tau_star(-5.0)));
  CHECK(tau(0.0) == 0.0);
  CHECK(tau_star_of_tilt(0.0) == 0.0);
  CHECK(tau_star_of_tilt(-std::numeric_limits<double>::infinity()) == 1.0);
}

TEST_CASE("tau_star is the grid Legendre transform of tau", "[legendre][property]") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> dist(-1.0, 5.0);
  for (int k = 0; k < 200; ++k) {
    const double u = dist(gen);
    CHECK(std::abs(tau_star(u) - grid_conjugate(u)) <= 1e-4);
  }
}

TEST_CASE("tau_star linear lower bound", "[legendre][property]") {
  std::mt19937_64 gen(8);
  std::exponential_distribution<double> dist(0.3);
  for (int k = 0; k < 200; ++k) {
    const double u = dist(gen);
    CHECK(tau_star(u - 1.0) >= u - std::numbers::e + 1.0);
  }
}

TEST_CASE("small-argument branches agree with long double formulas", "[legendre]") {
  for (double u : {-9e-4, -1e-5, 3e-5, 2e-4, 9.99e-4, 1.001e-3}) {
    const long double x = u;
    const long double ts = (x + 1) * std::log1p(x) - x;
    const long double t = std::expm1(x) - x;
    CHECK(tau_star(u) == Approx(static_cast<double>(ts)).epsilon(1e-9));
    CHECK(tau(u) == Approx(static_cast<double>(t)).epsilon(1e-9));
  }
  // leading Taylor terms
  CHECK(tau_star(1e-12) == Approx(0.5e-24).epsilon(1e-9));
  CHECK(tau(-1e-12) == Approx(0.5e-24).epsilon(1e-9));
  // tau_star(e^x - 1) = x e^x - e^x + 1
  for (double x : {-3.0, -0.5, 0.25, 2.0}) {
    CHECK(tau_star_of_tilt(x) == Approx(x * std::exp(x) - std::exp(x) + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("tau and tau_star are convex and nonnegative", "[legendre]") {
  for (double u = -0.99; u < 5.0; u += 0.01) {
    CHECK(tau_star(u) >= 0.0);
    CHECK(tau(u) >= 0.0);
    const double h = 1e-3;
    CHECK(tau_star(u + h) + tau_star(u - h) - 2 * tau_star(u) >= -1e-12);
  }
}
