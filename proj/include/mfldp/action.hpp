#pragma once

#include "mfldp/model.hpp"
#include "mfldp/simplex.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mfldp {

struct SliceOptions {
  double phi_cap = 200.0;    // |Phi| beyond this is read as a diverging dual
  double floor = 1e-9;       // masses below this are raised to it before solving
  double tolerance = 1e-13;  // gradient tolerance, relative to max(1, |theta|)
  int max_iterations = 500;
};

/// Optimum of the per-slice convex program
///   |||theta|||_xi = sup_Phi [ sum_k theta_k Phi_k - sum_{(i,j) in E} xi(i) lambda_ij(xi) tau(Phi_j - Phi_i) ].
struct SliceSolution {
  bool feasible = true;
  double cost = 0.0;          // primal value sum xi(i) lambda tau*(l / lambda - 1); +inf when infeasible
  double dual = 0.0;          // dual objective at phi
  double duality_gap = 0.0;   // cost - dual
  double residual = 0.0;      // max-norm of theta minus the net flow of the tilted rates
  double floor_cost = 0.0;    // part of cost carried by edges whose source mass was floored
  double flux = 0.0;          // sum over edges of xi(i) l_ij
  Vector phi;                 // potentials, phi[0] = 0
  Vector rates;               // l_e = lambda_e exp(phi_to - phi_from)
  Vector base_rates;          // lambda_e(xi)
  int iterations = 0;
  std::string diagnosis;      // why the slice is infeasible, empty otherwise
};

/// theta is the deviation from the McKean-Vlasov velocity of the floored measure:
/// the recovered rates have net flow A*_xi xi + theta. Requires sum(theta) = 0.
[[nodiscard]] SliceSolution slice_cost(const Model& m, const Vector& xi, const Vector& theta,
                                       const SliceOptions& opts = {});

/// Same program with the full velocity v as the constraint: net flow of xi(i) l_ij equals v.
[[nodiscard]] SliceSolution slice_cost_for_velocity(const Model& m, const Vector& xi, const Vector& v,
                                                    const SliceOptions& opts = {});

/// Core solver on precomputed base rates lambda_e(xi).
[[nodiscard]] SliceSolution solve_slice(const EdgeSet& edges, const Vector& xi, const Vector& lambda,
                                        const Vector& velocity, const SliceOptions& opts = {});

/// Piecewise-linear path through K + 1 knots.
struct PathGrid {
  std::vector<double> times;
  std::vector<Vector> points;

  /// K equal segments on the chord from nu to xi over [0, T].
  [[nodiscard]] static PathGrid linear(const Vector& nu, const Vector& xi, int K, double T);

  [[nodiscard]] std::size_t segments() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  [[nodiscard]] std::size_t r() const noexcept {
    return points.empty() ? 0 : static_cast<std::size_t>(points.front().size());
  }
  [[nodiscard]] double duration() const noexcept { return times.empty() ? 0.0 : times.back() - times.front(); }
  [[nodiscard]] Vector at(double t) const;

  /// t, mu0..mu{r-1}
  void write_csv(std::ostream& out) const;
  [[nodiscard]] static PathGrid read_csv(std::istream& in);
};

struct PathCost {
  double cost = 0.0;
  double floor_cost = 0.0;
  double flux = 0.0;  // integral of sum_e mu(i) l_e over the path
  std::vector<double> segment_cost;   // slice cost of each segment (rate, not multiplied by dt)
  std::vector<Vector> segment_rates;  // optimal l_e of each segment
  std::optional<std::size_t> infeasible_segment;
  std::string diagnosis;

  [[nodiscard]] bool finite() const noexcept { return !infeasible_segment.has_value(); }
};

/// Midpoint quadrature of the action: on each segment the velocity is the chord
/// slope and the slice is solved at the chord midpoint.
/// Quadrature nodes (fraction along the segment, weight summing to 1) for a segment of
/// length dt. max_substep <= 0 gives the midpoint rule; otherwise the composite
/// two-point Gauss-Legendre rule on equal sub-slices no longer than max_substep.
[[nodiscard]] std::vector<std::pair<double, double>> segment_nodes(double dt, double max_substep);

[[nodiscard]] PathCost path_cost(const Model& m, const PathGrid& path, const SliceOptions& opts = {},
                                 double max_substep = 0.0);

/// Rates l_e(t) of a time-dependent control on one time segment. A transport
/// segment moves flow[e] units of mass along each edge at constant velocity, so
/// l_e(t) = flow[e] / (duration * mu(t)(from)). A constant segment holds rates fixed.
struct ControlSegment {
  double start = 0.0;
  double end = 0.0;
  Vector from;   // measure at start
  Vector to;     // measure at end; linear in between
  bool transport = true;
  Vector flow;   // transport segments, per edge
  Vector rates;  // constant segments, per edge
};

struct ControlSchedule {
  EdgeSet edges;
  std::vector<ControlSegment> segments;

  [[nodiscard]] double duration() const noexcept {
    return segments.empty() ? 0.0 : segments.back().end - segments.front().start;
  }
  [[nodiscard]] Vector state_at(double t) const;
  [[nodiscard]] Vector rates_at(double t) const;
  /// L(t): l_e off the diagonal on E, rows summing to zero.
  [[nodiscard]] Matrix rate_matrix_at(double t) const;
  /// Integral of sum_e mu(t)(from) l_e(t); exact for transport, midpoint for constant segments.
  [[nodiscard]] double flux() const;

  /// t, edge, rate at `samples` uniformly spaced interior times per segment.
  void write_csv(std::ostream& out, int samples = 10) const;

 private:
  [[nodiscard]] std::size_t segment_index(double t) const;
};

struct Construction {
  ControlSchedule controls;
  std::vector<Vector> waypoints;  // nu, intermediate measures, xi
  std::vector<double> leg_bounds;
  double cost_bound = 0.0;        // sum of leg_bounds
  double C = 0.0;
  double c = 0.0;
};

/// Upper bound on the cost of the constant-velocity path from nu to xi in time T
/// when every transport pair is an edge:
///   sum |d log d| + sum |xi log xi - nu log nu| + |nu - xi|_1 (|log T| + |log C| + |log c| + 1/e + 2) + C T r^2
/// with d = |nu - xi| componentwise.
[[nodiscard]] double constant_velocity_bound(const Vector& nu, const Vector& xi, double T, double C, double c);

/// Constant-velocity transport from nu to xi with proportional allocation
/// g_ij = (xi_j - nu_j)_+ / sum (xi - nu)_+. Pairs that are edges move in one
/// leg; every other pair follows a shortest path of E one hop per leg. All legs
/// share the duration T / m. C and c default to the grid bounds of validate_model.
[[nodiscard]] Construction constant_velocity_controls(const Model& m, const Vector& nu, const Vector& xi, double T,
                                                      std::optional<double> C = std::nullopt,
                                                      std::optional<double> c = std::nullopt);

/// Path through the schedule's states with `knots_per_segment` equal steps per segment.
[[nodiscard]] PathGrid realized_path(const ControlSchedule& controls, int knots_per_segment);

/// Piecewise-constant controls given by the optimal slice rates of each path segment.
[[nodiscard]] ControlSchedule slice_controls(const Model& m, const PathGrid& path, const SliceOptions& opts = {});

/// Time change t -> t / alpha: duration T / alpha and rates alpha l(alpha t).
[[nodiscard]] std::pair<PathGrid, ControlSchedule> rescale_path(const PathGrid& path, const ControlSchedule& controls,
                                                                double alpha);

}  // namespace mfldp
