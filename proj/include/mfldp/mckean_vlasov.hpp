#pragma once

#include "mfldp/model.hpp"
#include "mfldp/simplex.hpp"

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfldp {

/// Solution of mu' = A*_mu mu on a uniform time grid.
struct OdePath {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vector> points;
  double max_clip = 0.0;   // largest negative mass removed by clipping
  int max_halvings = 0;    // deepest step-size halving used

  /// t, mu0..mu{r-1}
  void write_csv(std::ostream& out) const;
};

/// One classical RK4 step without clipping.
[[nodiscard]] Vector rk4_step(const Model& m, const Vector& mu, double dt);

/// Fixed-step RK4; each step is followed by clipping at zero and renormalizing.
/// A step whose clip exceeds 1e-6 is redone as two half steps, recursively, at most
/// 20 times; beyond that NumericalError is thrown.
[[nodiscard]] OdePath integrate(const Model& m, const SimplexPoint& nu, double horizon, double dt);

/// Endpoint only, without storing the path.
[[nodiscard]] Vector integrate_endpoint(const Model& m, const Vector& nu, double horizon, double dt);

enum class Stability { Stable, Unstable, Saddle, Undetermined };
[[nodiscard]] std::string to_string(Stability s);

struct Equilibrium {
  SimplexPoint point;
  Stability stability = Stability::Undetermined;
  std::vector<std::complex<double>> eigenvalues;  // of the tangent Jacobian
  double residual = 0.0;                           // max-norm of A*_xi xi
};

struct EquilibriumCatalog {
  std::vector<Equilibrium> equilibria;  // stable points first, then the rest
  std::size_t unresolved = 0;           // clusters where Newton did not converge
  double horizon = 0.0;                 // integration time used per start
  std::size_t starts = 0;

  [[nodiscard]] std::size_t l() const;  // number of stable equilibria
  [[nodiscard]] std::vector<SimplexPoint> stable_points() const;
  /// Index into equilibria of the closest catalogued point.
  [[nodiscard]] std::size_t nearest(const Vector& mu) const;
};

struct EquilibriumOptions {
  int starts = 32;
  std::uint64_t seed = 1;
  double horizon = -1.0;  // negative: min(50 / c_hat, 1e4)
  double dt = 0.01;
  double merge_tol = 1e-6;
  int threads = 0;
};

/// Jacobian of F(xi) = A*_xi xi restricted to the tangent space, by central differences (h = 1e-6).
[[nodiscard]] Matrix tangent_jacobian(const Model& m, const Vector& xi);

/// Damped Newton on F over the affine simplex hull with coordinates floored at 0.
/// Returns the root when max|F| <= 1e-10 within 100 iterations.
[[nodiscard]] std::optional<Vector> newton_equilibrium(const Model& m, const Vector& start);

[[nodiscard]] Stability classify(const std::vector<std::complex<double>>& eigenvalues, double threshold = 1e-8);

[[nodiscard]] EquilibriumCatalog find_equilibria(const Model& m, const EquilibriumOptions& opts = {});

struct OmegaLimitReport {
  bool flagged = false;
  std::size_t starts = 0;
  std::vector<SimplexPoint> offending_starts;
  std::vector<Vector> offending_endpoints;
  double max_endpoint_distance = 0.0;  // L1 distance of the worst endpoint to the catalogue
  double max_endpoint_speed = 0.0;     // max-norm of the drift at that endpoint
};

/// Integrates from every point of a simplex grid and flags endpoints that are not
/// within `tolerance` (L1) of a catalogued equilibrium.
[[nodiscard]] OmegaLimitReport omega_limit_check(const Model& m, const EquilibriumCatalog& catalog,
                                                 int resolution = 0, double tolerance = 1e-3);

/// 1 / min |Re eigenvalue| at the stable equilibrium nearest to mu.
[[nodiscard]] double relaxation_time(const EquilibriumCatalog& catalog, const Vector& mu);

}  // namespace mfldp
