#pragma once

#include "mfldp/action.hpp"
#include "mfldp/mckean_vlasov.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfldp {

/// Smooth barrier weight * sum_c (1 - |mu - c|^2 / radius^2)_+^2, integrated over time.
struct PathPenalty {
  std::vector<Vector> centers;
  double radius = 0.0;
  double weight = 0.0;

  [[nodiscard]] bool empty() const noexcept { return centers.empty() || !(weight > 0.0) || !(radius > 0.0); }
  [[nodiscard]] double value(const Vector& mu) const;
  [[nodiscard]] Vector gradient(const Vector& mu) const;
};

struct OptimizeOptions {
  int max_iterations = 3000;
  double relative_tolerance = 1e-7;  // over `window` accepted iterations
  int window = 10;
  int memory = 8;                    // L-BFGS pairs
  double knot_floor = 1e-9;
  // Longest midpoint sub-slice of a segment; negative: 0.25 / max(total rate at nu, at xi).
  double max_substep = -1.0;
  SliceOptions slice;
  PathPenalty penalty;
};

struct OptimizedPath {
  PathGrid path;
  double cost = 0.0;     // action of the returned path
  double penalty = 0.0;  // barrier value, not included in cost
  std::vector<double> history;  // objective after every accepted step, nonincreasing
  int iterations = 0;
  bool converged = false;
  double max_substep = 0.0;  // sub-slice bound actually used; path_cost with it reproduces cost
};

/// Knots of the piecewise-linear constant-velocity construction from nu to xi,
/// sampled at K + 1 uniform times on [0, T].
[[nodiscard]] PathGrid construction_path(const Model& m, const Vector& nu, const Vector& xi, int K, double T);

/// Local minimization of the action over the K - 1 interior knots with pinned
/// endpoints. Descent directions come from an L-BFGS memory on the tangent space,
/// steps are projected back onto the floored simplex and accepted by Armijo
/// backtracking. The gradient uses the dual potentials of each slice (envelope
/// theorem) and central differences of the rates.
[[nodiscard]] OptimizedPath optimize_path(const Model& m, const Vector& nu, const Vector& xi, int K, double T,
                                          const std::optional<PathGrid>& init = std::nullopt,
                                          const OptimizeOptions& opts = {});

/// Objective and gradient of optimize_path at a given path; gradient rows are knots.
/// A negative opts.max_substep is resolved from the path endpoints.
struct PathObjective {
  double action = 0.0;
  double penalty = 0.0;
  std::vector<Vector> gradient;
};
[[nodiscard]] PathObjective path_objective(const Model& m, const PathGrid& path, const OptimizeOptions& opts = {});

struct QuasipotentialOptions {
  int K = 20;
  double T_min = 0.1;
  double T_max = 100.0;
  int golden_iterations = 20;
  int restarts = 5;
  double restart_scale = 0.05;  // L1 size of the knot perturbation
  std::uint64_t seed = 1;
  int threads = 0;
  OptimizeOptions optimizer;
};

struct QuasipotentialResult {
  double V = 0.0;
  PathGrid path;
  double T = 0.0;
  double penalty = 0.0;
  std::vector<double> restart_costs;
  double restart_spread = 0.0;  // max - min over restarts
  std::vector<std::pair<double, double>> T_trace;  // (T, cost) per golden-section evaluation
  bool at_T_max = false;
  std::string warning;
};

/// inf over T in [T_min, T_max] of the optimized action from nu to xi: golden-section
/// search on log T with warm starts, then rescaled-incumbent refinement and seeded restarts.
[[nodiscard]] QuasipotentialResult quasipotential(const Model& m, const Vector& nu, const Vector& xi,
                                                  const QuasipotentialOptions& opts = {});

struct VTildeOptions {
  QuasipotentialOptions qp;
  double penalty_weight = -1.0;    // negative: 1e3 * C_hat
  double exclusion_radius = -1.0;  // negative: half the least distance between representatives
  double activation = 0.01;        // penalty above this fraction of the cost makes the entry +inf
};

struct VTildeResult {
  Matrix V;  // +inf where the exclusion was active
  std::vector<std::vector<QuasipotentialResult>> paths;
  double penalty_weight = 0.0;
  double exclusion_radius = 0.0;
};

/// Quasipotentials between representatives, each avoiding the other representatives'
/// neighbourhoods. Diagonal entries are 0.
[[nodiscard]] VTildeResult v_tilde_matrix(const Model& m, const std::vector<Vector>& reps,
                                          const VTildeOptions& opts = {});

/// Min-plus closure (all-pairs shortest paths) of an extended-real matrix with zero diagonal.
[[nodiscard]] Matrix v_matrix(const Matrix& vtilde);

struct FWWeights {
  Vector W;
  Vector s;  // W - min W
  std::vector<std::size_t> graph_counts;     // |G{i}|
  std::vector<std::vector<int>> best_graph;  // successor of each vertex in the minimizing graph, -1 at i
};

/// W(K_i) = min over in-trees rooted at i of the summed V weights, by enumeration.
/// Supports l <= 7; larger catalogues throw NumericalError.
[[nodiscard]] FWWeights fw_weights(const Matrix& V);

struct FWOptions {
  EquilibriumOptions equilibria;
  VTildeOptions vtilde;
  bool check_omega = true;
};

struct FWCatalog {
  EquilibriumCatalog catalog;
  std::vector<Vector> reps;  // stable equilibria, one per class
  Matrix Vtilde;
  Matrix V;
  FWWeights weights;
  QuasipotentialOptions qp;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t l() const noexcept { return reps.size(); }
  [[nodiscard]] const Vector& s() const noexcept { return weights.s; }
};

/// Equilibria, omega-limit check, V-tilde, V and the graph weights. Throws
/// UnsupportedDynamics when trajectories do not settle on catalogued equilibria.
[[nodiscard]] FWCatalog fw_catalog(const Model& m, const FWOptions& opts = {});

/// s(xi) = min_i [s_i + V(xi | rep_i)].
[[nodiscard]] double rate_function(const Model& m, const FWCatalog& fw, const Vector& xi);

}  // namespace mfldp
