#include "mfldp/builtin_models.hpp"
#include "mfldp/errors.hpp"
#include "mfldp/mckean_vlasov.hpp"
#include "mfldp/quasipotential.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace mfldp;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector pt(double x) { return Vector{{x, 1.0 - x}}; }

double kl(const Vector& xi, const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (xi[i] > 0.0) {
      h += xi[i] * std::log(xi[i] / p[i]);
    }
  }
  return h;
}

// All successor maps on {0..l-1} \ {root} with no cycles, by brute force.
std::vector<std::vector<int>> in_trees(int l, int root) {
  std::vector<std::vector<int>> out;
  std::vector<int> succ(static_cast<std::size_t>(l), -1);
  std::function<void(int)> rec = [&](int j) {
    if (j == l) {
      for (int s = 0; s < l; ++s) {
        int v = s;
        for (int step = 0; step <= l && v != root; ++step) {
          v = succ[static_cast<std::size_t>(v)];
        }
        if (v != root) {
          return;
        }
      }
      out.push_back(succ);
      return;
    }
    if (j == root) {
      rec(j + 1);
      return;
    }
    for (int t = 0; t < l; ++t) {
      if (t != j) {
        succ[static_cast<std::size_t>(j)] = t;
        rec(j + 1);
      }
    }
    succ[static_cast<std::size_t>(j)] = -1;
  };
  rec(0);
  return out;
}

// Quasipotential of a two-state model on the segment [a, b] of x = mu[0]:
// a path from a to b crosses every cell, and the cheapest crossing of a cell of
// width h at x costs h * min_u L(x, u) / u.
double dp_quasipotential(const Model& m, double a, double b, int cells = 2000) {
  const double sign = b > a ? 1.0 : -1.0;
  const double h = std::abs(b - a) / cells;
  double total = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double x = a + sign * (c + 0.5) * h;
    const Vector lam = m.edge_rates(pt(x));
    const double down = x * lam[0];          // 0 -> 1 lowers x
    const double up = (1.0 - x) * lam[1];    // 1 -> 0 raises x
    auto lagrangian = [&](double u) {
      const double v = sign * u;
      const double y = (v + std::sqrt(v * v + 4.0 * down * up)) / (2.0 * up);
      return std::log(y) * v - up * (y - 1.0) - down * (1.0 / y - 1.0);
    };
    double lo = -20.0;
    double hi = 6.0;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (lagrangian(std::exp(m1)) / std::exp(m1) < lagrangian(std::exp(m2)) / std::exp(m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    const double u = std::exp(0.5 * (lo + hi));
    total += h * lagrangian(u) / u;
  }
  return total;
}

PathGrid random_path(std::mt19937_64& gen, const Vector& nu, const Vector& xi, int K, double T) {
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  PathGrid p = PathGrid::linear(nu, xi, K, T);
  for (std::size_t k = 1; k + 1 < p.points.size(); ++k) {
    for (auto& v : p.points[k]) {
      v = std::max(0.05, v + d(gen));
    }
    p.points[k] /= p.points[k].sum();
  }
  return p;
}

}  // namespace

TEST_CASE("path objective gradient matches finite differences", "[quasipotential]") {
  std::mt19937_64 gen(3);
  for (const Model& m : {sis_bistable_model(), rotation3_model(), csma_model(3)}) {
    const auto r = static_cast<Eigen::Index>(m.r());
    const Vector nu = Vector::Constant(r, 1.0 / static_cast<double>(r));
    Vector xi = Vector::LinSpaced(r, 1.0, 2.0);
    xi /= xi.sum();
    OptimizeOptions opts;
    opts.max_substep = 0.3;
    opts.penalty.centers = {Vector::Constant(r, 0.3)};
    opts.penalty.centers[0][0] = 1.0 - 0.3 * static_cast<double>(r - 1);
    opts.penalty.radius = 0.2;
    opts.penalty.weight = 5.0;
    const PathGrid p = random_path(gen, nu, xi, 6, 1.5);
    const PathObjective obj = path_objective(m, p, opts);
    REQUIRE(std::isfinite(obj.action));
    for (std::size_t k = 1; k + 1 < p.points.size(); ++k) {
      for (Eigen::Index i = 1; i < r; ++i) {
        Vector dir = Vector::Zero(r);
        dir[0] = -1.0;
        dir[i] = 1.0;
        constexpr double eps = 1e-6;
        PathGrid plus = p;
        PathGrid minus = p;
        plus.points[k] += eps * dir;
        minus.points[k] -= eps * dir;
        const PathObjective op = path_objective(m, plus, opts);
        const PathObjective om = path_objective(m, minus, opts);
        const double fd = ((op.action + op.penalty) - (om.action + om.penalty)) / (2 * eps);
        const double an = obj.gradient[k].dot(dir);
        CHECK(an == Approx(fd).margin(1e-5).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("quasipotential from a point to itself is zero", "[quasipotential]") {
  const Model m = const2_model();
  const QuasipotentialResult res = quasipotential(m, pt(0.4), pt(0.4));
  CHECK(res.V == 0.0);
}

TEST_CASE("optimizer history is nonincreasing and cost is reproducible", "[quasipotential]") {
  const Model m = sis_bistable_model();
  const OptimizedPath p = optimize_path(m, pt(0.2), pt(0.7), 20, 4.0);
  REQUIRE(p.history.size() > 1);
  for (std::size_t k = 1; k < p.history.size(); ++k) {
    CHECK(p.history[k] <= p.history[k - 1]);
  }
  const PathCost audit = path_cost(m, p.path, {}, p.max_substep);
  CHECK(audit.cost == Approx(p.cost).epsilon(1e-12));
  CHECK(p.path.points.front() == pt(0.2));
  CHECK(p.path.points.back() == pt(0.7));
}

TEST_CASE("const2 quasipotential matches relative entropy", "[quasipotential][slow]") {
  const Model m = const2_model();
  const Vector p = pt(2.0 / 3.0);
  for (double x : {0.1, 0.3, 0.5, 0.75, 0.9}) {
    const double H = kl(pt(x), p);
    const QuasipotentialResult res = quasipotential(m, p, pt(x));
    INFO("x = " << x << " V = " << res.V << " H = " << H);
    CHECK(std::abs(res.V / H - 1.0) <= 0.05);
  }
}

TEST_CASE("downhill along the flow costs nothing", "[quasipotential]") {
  const Model m = const2_model();
  const Vector nu = pt(0.95);
  const Vector xi = integrate_endpoint(m, nu, 0.5, 1e-3);
  QuasipotentialOptions opts;
  opts.restarts = 1;
  const QuasipotentialResult res = quasipotential(m, nu, xi, opts);
  CHECK(res.V <= 1e-3);
}

TEST_CASE("K doubling does not raise the cost", "[quasipotential]") {
  const Model m = sis_bistable_model();
  const OptimizedPath coarse = optimize_path(m, pt(0.3), pt(0.6), 10, 3.0);
  const OptimizedPath fine = optimize_path(m, pt(0.3), pt(0.6), 20, 3.0, coarse.path);
  CHECK(fine.cost <= coarse.cost * (1.0 + 1e-6));
}

TEST_CASE("quasipotential is bounded by the constant-velocity construction", "[quasipotential]") {
  const Model m = sis_bistable_model();
  const double lo = (1.0 - std::sqrt(0.8)) / 2.0;
  const Vector nu = pt(lo);
  const Vector xi = pt(0.4);
  QuasipotentialOptions opts;
  opts.restarts = 2;
  const QuasipotentialResult res = quasipotential(m, nu, xi, opts);
  const Construction c = constant_velocity_controls(m, nu, xi, res.T);
  const PathCost built = path_cost(m, realized_path(c.controls, 40));
  CHECK(res.V <= built.cost);
  CHECK(res.V <= c.cost_bound);
  CHECK(res.V > 0.0);
}

TEST_CASE("min-plus closure", "[quasipotential][fw]") {
  Matrix vt(3, 3);
  vt << 0, 5, kInf, 1, 0, 1, kInf, 2, 0;
  const Matrix v = v_matrix(vt);
  CHECK(v(0, 2) == 6.0);
  CHECK(v(2, 0) == 3.0);
  CHECK(v(0, 1) == 5.0);
  const Matrix vv = v_matrix(v);
  CHECK(((vv - v).array().abs() == 0.0).all());
  Matrix two(2, 2);
  two << 0, 3, 4, 0;
  CHECK(v_matrix(two) == two);
}

TEST_CASE("graph weights match exhaustive enumeration", "[quasipotential][fw]") {
  Matrix v2(2, 2);
  v2 << 0, 0.7, 0.3, 0;
  const FWWeights w2 = fw_weights(v2);
  CHECK(w2.W[0] == 0.3);
  CHECK(w2.W[1] == 0.7);
  CHECK(w2.s[0] == 0.0);
  CHECK(w2.s[1] == Approx(0.4).margin(1e-15));

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (int l = 3; l <= 5; ++l) {
    Matrix V = Matrix::Zero(l, l);
    for (int i = 0; i < l; ++i) {
      for (int j = 0; j < l; ++j) {
        if (i != j) {
          V(i, j) = d(gen);
        }
      }
    }
    const FWWeights w = fw_weights(V);
    double min_W = kInf;
    for (int root = 0; root < l; ++root) {
      const auto trees = in_trees(l, root);
      CHECK(w.graph_counts[static_cast<std::size_t>(root)] == trees.size());
      double best = kInf;
      for (const auto& t : trees) {
        double sum = 0.0;
        for (int j = 0; j < l; ++j) {
          if (j != root) {
            sum += V(j, t[static_cast<std::size_t>(j)]);
          }
        }
        best = std::min(best, sum);
      }
      CHECK(w.W[root] == Approx(best).epsilon(1e-14));
      min_W = std::min(min_W, best);
    }
    CHECK(w.s.minCoeff() == 0.0);
    if (l == 3) {
      CHECK(w.graph_counts == std::vector<std::size_t>{3, 3, 3});
    }
  }
  CHECK_THROWS_AS(fw_weights(Matrix::Ones(8, 8)), NumericalError);
}

TEST_CASE("const2 rate function vanishes at the equilibrium", "[quasipotential][fw]") {
  const Model m = const2_model();
  FWOptions opts;
  opts.vtilde.qp.restarts = 1;
  const FWCatalog fw = fw_catalog(m, opts);
  REQUIRE(fw.l() == 1);
  CHECK(fw.reps[0][0] == Approx(2.0 / 3.0).margin(1e-8));
  CHECK(rate_function(m, fw, fw.reps[0]) <= 1e-6);
  CHECK(rate_function(m, fw, pt(0.5)) == Approx(kl(pt(0.5), pt(2.0 / 3.0))).epsilon(0.05));
}

TEST_CASE("sis-bistable pipeline", "[quasipotential][fw][slow]") {
  const Model m = sis_bistable_model();
  const FWCatalog fw = fw_catalog(m);
  REQUIRE(fw.l() == 2);
  const double a = fw.reps[0][0];
  const double b = fw.reps[1][0];
  CHECK(std::min(a, b) == Approx((1.0 - std::sqrt(0.8)) / 2.0).margin(1e-6));
  CHECK(std::max(a, b) == Approx((1.0 + std::sqrt(0.8)) / 2.0).margin(1e-6));
  const double v01 = fw.Vtilde(0, 1);
  const double v10 = fw.Vtilde(1, 0);
  REQUIRE(std::isfinite(v01));
  REQUIRE(std::isfinite(v10));
  CHECK(v01 > 0.0);
  CHECK(v10 > 0.0);
  CHECK(std::abs(v01 / v10 - 1.0) <= 0.02);
  const double dp = dp_quasipotential(m, a, b);
  INFO("Vtilde = " << v01 << " dp = " << dp);
  CHECK(std::abs(v01 / dp - 1.0) <= 0.10);
  CHECK(fw.V == fw.Vtilde);
  CHECK(fw.s().maxCoeff() <= 5e-3);
  CHECK(fw.s().minCoeff() == 0.0);
  CHECK(rate_function(m, fw, fw.reps[1]) == Approx(fw.s()[1]).margin(1e-12));
}
