#include "mfldp/builtin_models.hpp"
#include "mfldp/errors.hpp"
#include "mfldp/model.hpp"
#include "mfldp/model_io.hpp"

#include <catch_amalgamated.hpp>

#include <queue>
#include <random>

using namespace mfldp;
using Catch::Approx;

namespace {

bool reachable_all_pairs(std::size_t r, const std::vector<Edge>& edges) {
  for (std::size_t s = 0; s < r; ++s) {
    std::vector<bool> seen(r, false);
    std::queue<int> q;
    q.push(static_cast<int>(s));
    seen[s] = true;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (const Edge& e : edges) {
        if (e.from == v && !seen[static_cast<std::size_t>(e.to)]) {
          seen[static_cast<std::size_t>(e.to)] = true;
          q.push(e.to);
        }
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("edge set validation", "[model]") {
  CHECK_THROWS_AS(EdgeSet(2, {{0, 0}}), ValidationError);
  CHECK_THROWS_AS(EdgeSet(2, {{0, 2}}), ValidationError);
  CHECK_THROWS_AS(EdgeSet(2, {{0, 1}, {0, 1}}), ValidationError);
  CHECK_FALSE(EdgeSet(2, {{0, 1}}).irreducible());
  CHECK(EdgeSet(2, {{0, 1}, {1, 0}}).irreducible());
}

TEST_CASE("csma structure", "[model]") {
  const Model m = csma_model(3);
  CHECK(m.edges().irreducible());
  std::vector<Edge> expected{{0, 1}, {1, 2}, {1, 0}, {2, 0}};
  CHECK(std::vector<Edge>(m.edges().begin(), m.edges().end()) == expected);
  CHECK_FALSE(m.edges().contains(0, 0));
  for (int r = 2; r <= 6; ++r) {
    const Model big = csma_model(r);
    for (int i = 0; i < r; ++i) {
      CHECK(big.edges().contains(i, (i + 1) % r));
      if (i >= 1) {
        CHECK(big.edges().contains(i, 0));
      }
    }
  }
}

TEST_CASE("irreducibility agrees with brute-force reachability", "[model][property]") {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t r = 1 + gen() % 8;
    std::bernoulli_distribution keep(0.05 + 0.4 * (trial % 10) / 10.0);
    std::vector<Edge> edges;
    for (int i = 0; i < static_cast<int>(r); ++i) {
      for (int j = 0; j < static_cast<int>(r); ++j) {
        if (i != j && keep(gen)) {
          edges.push_back({i, j});
        }
      }
    }
    CHECK(EdgeSet(r, edges).irreducible() == reachable_all_pairs(r, edges));
  }
}

TEST_CASE("validation report", "[model]") {
  const ValidationReport rep = validate_model(const2_model(), 100);
  CHECK(rep.irreducible);
  CHECK(rep.c_hat == 1.0);
  CHECK(rep.C_hat == 2.0);
  CHECK(rep.lipschitz == 0.0);
  CHECK(rep.passed());

  const Model one_way("oneway", EdgeSet(2, {{0, 1}}), {RateExpr::parse("1")});
  const ValidationReport bad = validate_model(one_way, 10);
  CHECK_FALSE(bad.irreducible);
  CHECK_FALSE(bad.a1);

  const Model vanishing("vanish", EdgeSet(2, {{0, 1}, {1, 0}}), {RateExpr::parse("mu[0]"), RateExpr::parse("1")});
  CHECK_FALSE(validate_model(vanishing, 10).a3);

  const Model broken("broken", EdgeSet(2, {{0, 1}, {1, 0}}), {RateExpr::parse("log(mu[0])"), RateExpr::parse("1")});
  CHECK_THROWS_AS(validate_model(broken, 10), ValidationError);

  CHECK_THROWS_AS(Model("wide", EdgeSet(2, {{0, 1}, {1, 0}}), {RateExpr::parse("mu[2]"), RateExpr::parse("1")}),
                  ValidationError);

  const ValidationReport sis = validate_model(sis_bistable_model(), 0);
  CHECK(sis.resolution == 50);
  CHECK(sis.c_hat == Approx(0.1));
  CHECK(sis.C_hat == Approx(2.1));
  // d/dmu1 of 2 mu1^2 is at most 4; per unit of L1 distance that is 2.
  CHECK(sis.lipschitz <= 2.0 + 1e-9);
  CHECK(sis.lipschitz >= 1.9);
}

TEST_CASE("every built-in model passes validation", "[model]") {
  for (const auto& name : builtin_model_names()) {
    INFO(name);
    CHECK(validate_model(builtin_model(name)).passed());
  }
  CHECK(default_grid_resolution(4) == 50);
  CHECK(default_grid_resolution(5) == 20);
}

TEST_CASE("rate matrix", "[model]") {
  const RateMatrix a = rate_matrix(const2_model(), SimplexPoint{0.3, 0.7});
  CHECK(a(0, 0) == -1.0);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 0) == 2.0);
  CHECK(a(1, 1) == -2.0);

  const RateMatrix b = rate_matrix(sis_bistable_model(), SimplexPoint{0.5, 0.5});
  CHECK(b(0, 1) == Approx(0.6));
  CHECK(b(1, 0) == Approx(0.6));
  CHECK(b(0, 0) == Approx(-0.6));

  for (const auto& name : builtin_model_names()) {
    const Model m = builtin_model(name);
    for (const auto& xi : simplex_grid(m.r(), 12)) {
      const RateMatrix q = rate_matrix(m, xi);
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        CHECK(std::abs(q.row(i).sum()) <= 1e-15);
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
          if (i != j && !m.edges().contains(static_cast<int>(i), static_cast<int>(j))) {
            CHECK(q(i, j) == 0.0);
          }
        }
      }
      const Vector d = drift(m, xi.weights());
      CHECK((d - q.transpose() * xi.weights()).cwiseAbs().maxCoeff() < 1e-13);
      CHECK(std::abs(d.sum()) < 1e-14);
    }
  }
}

TEST_CASE("json model round trip", "[model][io]") {
  const Model m = csma_model(4);
  const Model back = model_from_json(model_to_json(m));
  CHECK(back.r() == 4);
  REQUIRE(back.edges().size() == m.edges().size());
  const Vector mu = SimplexPoint{0.1, 0.2, 0.3, 0.4}.weights();
  CHECK((back.edge_rates(mu) - m.edge_rates(mu)).norm() == 0.0);

  const Model param = model_from_json(nlohmann::json::parse(R"({"builtin": "csma", "r": 4, "gamma": 2})"));
  CHECK(param.r() == 4);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"states": 2, "edges": [{"from": 0, "to": 1, "rate": "1 +"}]})")),
                  ValidationError);
  CHECK_THROWS_AS(load_model("no-such-model"), ValidationError);
}
