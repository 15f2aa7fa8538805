#include "mfldp/builtin_models.hpp"
#include "mfldp/particle_sim.hpp"
#include "mfldp/rng.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

using namespace mfldp;
using Catch::Approx;

namespace {

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

}  // namespace

TEST_CASE("philox known-answer vectors", "[rng]") {
  const auto zero = Philox4x32::bijection({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  const auto ones = Philox4x32::bijection({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  CHECK(ones == Philox4x32::Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  const auto pi = Philox4x32::bijection({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  CHECK(pi == Philox4x32::Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams are reproducible and split streams differ", "[rng]") {
  Philox4x32 a(42), b(42);
  for (int k = 0; k < 100; ++k) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Philox4x32 s0 = Philox4x32(42).split(0);
  Philox4x32 s1 = Philox4x32(42).split(1);
  int same = 0;
  for (int k = 0; k < 100; ++k) {
    same += s0.next_u32() == s1.next_u32();
  }
  CHECK(same < 3);
  double mean = 0;
  Philox4x32 u(9);
  for (int k = 0; k < 100000; ++k) {
    const double x = u.uniform01();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    mean += x / 100000;
  }
  CHECK(mean == Approx(0.5).margin(0.005));
}

TEST_CASE("gillespie step on single-edge states", "[sim]") {
  const Model m = const2_model();
  Philox4x32 rng(1);
  Simulator all0(m, LatticePoint({10, 0}), rng);
  CHECK(all0.total_rate() == 10.0);
  const Jump j0 = gillespie_step(m, LatticePoint({10, 0}), rng);
  CHECK(j0.next.counts == std::vector<int>{9, 1});
  Simulator all1(m, LatticePoint({0, 10}), rng);
  CHECK(all1.total_rate() == 20.0);
  CHECK(gillespie_step(m, LatticePoint({0, 10}), rng).next.counts == std::vector<int>{1, 9});
}

TEST_CASE("gillespie step chooses moves with generator probabilities", "[sim]") {
  const Model m = const2_model();
  Philox4x32 rng(7);
  const int draws = 100000;
  int back = 0;
  double hold = 0;
  for (int k = 0; k < draws; ++k) {
    const Jump j = gillespie_step(m, LatticePoint({1, 1}), rng);
    back += j.next.counts[0] == 2;
    hold += j.holding_time / draws;
  }
  const double p = 2.0 / 3.0;
  const double sigma = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(static_cast<double>(back) / draws - p) <= 3 * sigma);
  // Total rate 3: mean holding time 1/3 with standard deviation 1/3.
  CHECK(std::abs(hold - 1.0 / 3.0) <= 3 * (1.0 / 3.0) / std::sqrt(draws));
}

TEST_CASE("trajectories conserve mass, use edges and are reproducible", "[sim]") {
  const Model m = csma_model(3);
  const LatticePoint init({30, 20, 10});
  const Trajectory a = simulate(m, 60, init, 5.0, 99);
  const Trajectory b = simulate(m, 60, init, 5.0, 99);
  REQUIRE(a.events() > 10);
  CHECK(a.times == b.times);
  CHECK(a.states == b.states);
  for (std::size_t n = 1; n <= a.events(); ++n) {
    const LatticePoint prev = a.state(n - 1);
    const LatticePoint next = a.state(n);
    CHECK(next.N == 60);
    int from = -1, to = -1, changed = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const int d = next.counts[k] - prev.counts[k];
      if (d == -1) from = static_cast<int>(k);
      if (d == 1) to = static_cast<int>(k);
      changed += d != 0;
    }
    CHECK(changed == 2);
    CHECK(m.edges().contains(from, to));
    CHECK(a.times[n - 1] > (n >= 2 ? a.times[n - 2] : 0.0));
  }
  std::ostringstream sa, sb;
  a.write_csv(sa, m.edges());
  b.write_csv(sb, m.edges());
  CHECK(sa.str() == sb.str());

  const Trajectory empty = simulate(m, 60, init, 0.0, 1);
  CHECK(empty.events() == 0);
  CHECK(empty.state_at(0.0) == init);
}

TEST_CASE("law of large numbers for const2", "[sim][property]") {
  const Model m = const2_model();
  const int N = 1000;
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Trajectory traj = simulate(m, N, LatticePoint({500, 500}), 10.0, seed);
    double worst = 0;
    for (int k = 0; k <= 200; ++k) {
      const double t = 0.05 * k;
      const double exact0 = 2.0 / 3.0 + (0.5 - 2.0 / 3.0) * std::exp(-3 * t);
      const Vector mu = traj.state_at(t).as_vector();
      // total variation distance
      worst = std::max(worst, 0.5 * (std::abs(mu[0] - exact0) + std::abs(mu[1] - (1 - exact0))));
    }
    good += worst <= 0.08;
  }
  CHECK(good >= 19);
}

TEST_CASE("stationary histogram of const2 is binomial", "[sim]") {
  const Model m = const2_model();
  StationaryOptions opts;
  opts.sample = 5000;
  opts.seed = 3;
  const OccupationMeasure occ = stationary_histogram(m, 50, opts);
  CHECK(occ.exact_lattice());
  CHECK(occ.horizon() == Approx(5000).epsilon(1e-9));
  double tv = 0;
  double total = 0;
  std::vector<double> prob(51, 0.0);
  for (const auto& [key, p] : occ.normalized()) {
    prob[static_cast<std::size_t>(key[1])] = p;
    total += p;
  }
  CHECK(total == Approx(1.0).epsilon(1e-12));
  for (int k = 0; k <= 50; ++k) {
    tv += 0.5 * std::abs(prob[static_cast<std::size_t>(k)] - binomial_pmf(50, k, 1.0 / 3.0));
  }
  CHECK(tv <= 0.05);

  StationaryOptions o100;
  o100.sample = 2000;
  const auto mode = stationary_histogram(m, 100, o100).mode();
  CHECK(std::abs(mode[0] - 67) <= 2);
}

TEST_CASE("noninteracting three-state model converges to the multinomial law", "[sim][property]") {
  const Model m("three", EdgeSet(3, {{0, 1}, {1, 2}, {2, 0}, {1, 0}}),
                {RateExpr::parse("1"), RateExpr::parse("2"), RateExpr::parse("1.5"), RateExpr::parse("0.5")});
  // Solve A* p = 0.
  const RateMatrix a = rate_matrix(m, SimplexPoint::uniform(3));
  Eigen::MatrixXd sys(4, 3);
  sys.topRows(3) = a.transpose();
  sys.row(3).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4);
  rhs[3] = 1;
  const Eigen::VectorXd p = sys.colPivHouseholderQr().solve(rhs);
  const int N = 12;
  auto tv_for = [&](double sample) {
    StationaryOptions opts;
    opts.sample = sample;
    opts.burn_in = 10;
    const auto occ = stationary_histogram(m, N, opts);
    double tv = 0;
    const auto normalized = occ.normalized();
    std::map<std::vector<int>, double> got(normalized.begin(), normalized.end());
    for (const auto& c : compositions(3, N)) {
      const double logp = std::lgamma(N + 1.0) - std::lgamma(c[0] + 1.0) - std::lgamma(c[1] + 1.0) -
                          std::lgamma(c[2] + 1.0) + c[0] * std::log(p[0]) + c[1] * std::log(p[1]) +
                          c[2] * std::log(p[2]);
      tv += 0.5 * std::abs(got[c] - std::exp(logp));
    }
    return tv;
  };
  const double coarse = tv_for(200);
  const double fine = tv_for(20000);
  CHECK(fine < coarse);
  CHECK(fine < 0.03);
}

TEST_CASE("cell histograms for large N", "[sim]") {
  StationaryOptions opts;
  opts.sample = 50;
  opts.burn_in = 2;
  opts.cell_resolution = 20;
  const auto occ = stationary_histogram(const2_model(), 1000, opts);
  CHECK_FALSE(occ.exact_lattice());
  CHECK(occ.cell_resolution() == 20);
  double total = 0;
  for (const auto& [key, p] : occ.normalized()) {
    CHECK(key[0] + key[1] == 20);
    total += p;
  }
  CHECK(total == Approx(1.0));
  CHECK(occ.ball_probability(SimplexPoint{2.0 / 3, 1.0 / 3}, 0.1) > 0.9);
}

TEST_CASE("replicas merge into one measure", "[sim]") {
  StationaryOptions opts;
  opts.sample = 100;
  opts.burn_in = 5;
  opts.replicas = 4;
  const auto a = stationary_histogram(const2_model(), 40, opts);
  const auto b = stationary_histogram(const2_model(), 40, opts);
  CHECK(a.horizon() == Approx(400));
  CHECK(a.entries() == b.entries());
}

TEST_CASE("slope regression", "[sim]") {
  const std::vector<int> N{50, 100, 200, 400};
  std::vector<double> p;
  for (int n : N) {
    p.push_back(std::exp(-0.05 * n - 1.0));
  }
  const SlopeEstimate exact = fit_slope(N, p);
  CHECK(exact.slope == Approx(0.05).epsilon(1e-12));
  CHECK(exact.intercept == Approx(1.0).epsilon(1e-9));
  CHECK(exact.slope_stderr == Approx(0.0).margin(1e-12));

  SlopeOptions opts;
  opts.sample = {2000};
  opts.seed = 11;
  const SlopeEstimate at_eq = ldp_slope(const2_model(), SimplexPoint{2.0 / 3, 1.0 / 3}, 0.05, N, opts);
  CHECK_FALSE(at_eq.one_sided);
  CHECK(std::abs(at_eq.slope) <= 0.01);

  SlopeOptions tiny;
  tiny.sample = {1.0};
  const SlopeEstimate bound = ldp_slope(const2_model(), SimplexPoint{0.1, 0.9}, 0.02, {100, 200, 300}, tiny);
  CHECK(bound.one_sided);
  CHECK(bound.lower_bound > 0.0);
}
