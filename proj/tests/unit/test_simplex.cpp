#include "mfldp/simplex.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <set>

using namespace mfldp;
using Catch::Approx;

TEST_CASE("simplex point normalizes and clips round-off negatives", "[simplex]") {
  SimplexPoint p{2.0, 1.0, 1.0};
  REQUIRE(p.size() == 3);
  CHECK(p[0] == Approx(0.5));
  CHECK(p.weights().sum() == Approx(1.0).margin(1e-15));

  SimplexPoint q{0.5, 0.5 + 1e-13, -1e-13};
  CHECK(q[2] == 0.0);
  CHECK(std::abs(q.weights().sum() - 1.0) <= 1e-12);

  CHECK_THROWS_AS((SimplexPoint{0.5, -0.1, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS((SimplexPoint{0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("compositions enumerate the lattice exactly once", "[simplex]") {
  for (std::size_t r = 1; r <= 4; ++r) {
    for (int n : {0, 1, 5, 7}) {
      const auto all = compositions(r, n);
      CHECK(all.size() == composition_count(r, n));
      std::set<std::vector<int>> unique(all.begin(), all.end());
      CHECK(unique.size() == all.size());
      for (const auto& c : all) {
        int total = 0;
        for (int k : c) {
          CHECK(k >= 0);
          total += k;
        }
        CHECK(total == n);
      }
      CHECK(std::is_sorted(all.begin(), all.end()));
    }
  }
  CHECK(simplex_grid(3, 50).size() == 1326);
}

TEST_CASE("tangent basis is orthonormal and mass free", "[simplex]") {
  for (std::size_t r = 2; r <= 6; ++r) {
    const Matrix b = tangent_basis(r);
    CHECK((b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).norm() < 1e-12);
    CHECK(b.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("projection onto the floored simplex", "[simplex]") {
  std::mt19937 gen(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(4);
    for (int k = 0; k < 4; ++k) {
      x[k] = normal(gen);
    }
    const double floor = trial % 2 ? 1e-3 : 0.0;
    const Vector p = project_to_simplex(x, floor);
    CHECK(p.sum() == Approx(1.0).margin(1e-12));
    CHECK(p.minCoeff() >= floor - 1e-15);
    // Optimality: no feasible vertex-direction move reduces the distance.
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i == j || p[i] - 1e-6 < floor) {
          continue;
        }
        Vector q = p;
        q[i] -= 1e-6;
        q[j] += 1e-6;
        CHECK((q - x).squaredNorm() >= (p - x).squaredNorm() - 1e-15);
      }
    }
  }
  const Vector inside = SimplexPoint{0.2, 0.3, 0.5}.weights();
  CHECK((project_to_simplex(inside) - inside).norm() < 1e-15);
}

TEST_CASE("l1 distance and interpolation", "[simplex]") {
  const SimplexPoint a{1.0, 0.0};
  const SimplexPoint b{0.0, 1.0};
  CHECK(l1_distance(a, b) == Approx(2.0));
  const SimplexPoint mid = lerp(a, b, 0.25);
  CHECK(mid[0] == Approx(0.75));
  CHECK(SimplexPoint::vertex(3, 1) == (SimplexPoint{0.0, 1.0, 0.0}));
  CHECK_FALSE(SimplexPoint::vertex(3, 1) == SimplexPoint::vertex(2, 1));
}
