#pragma once

#include "mfldp/model.hpp"
#include "mfldp/rng.hpp"
#include "mfldp/simplex.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

namespace mfldp {

/// A point of the lattice simplex: r nonnegative counts summing to N.
struct LatticePoint {
  std::vector<int> counts;
  int N = 0;

  LatticePoint() = default;
  explicit LatticePoint(std::vector<int> c);

  /// Largest-remainder rounding of N * mu.
  static LatticePoint nearest(const SimplexPoint& mu, int N);

  [[nodiscard]] SimplexPoint measure() const;
  [[nodiscard]] Vector as_vector() const;
  bool operator==(const LatticePoint&) const = default;
};

struct Jump {
  double holding_time = 0.0;
  LatticePoint next;
  std::size_t edge = 0;
};

/// One step of the empirical-measure chain: edge e = (i, j) fires at rate
/// counts[i] * lambda_e(counts / N).
[[nodiscard]] Jump gillespie_step(const Model& m, const LatticePoint& state, Philox4x32& rng);

/// Reusable event loop with preallocated buffers. Constant-rate models skip
/// expression evaluation.
class Simulator {
 public:
  Simulator(const Model& m, const LatticePoint& init, Philox4x32 rng);

  /// Draws the next event; returns its holding time and applies the jump.
  double step();

  [[nodiscard]] double total_rate();
  [[nodiscard]] std::size_t last_edge() const noexcept { return last_edge_; }
  [[nodiscard]] const std::vector<int>& counts() const noexcept { return counts_; }
  [[nodiscard]] int N() const noexcept { return N_; }
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  void refresh_propensities();

  const Model& model_;
  std::vector<Edge> edges_;
  std::vector<int> counts_;
  std::vector<double> mu_;
  std::vector<double> lambda_;
  std::vector<double> propensity_;
  Philox4x32 rng_;
  int N_;
  double inv_N_;
  double time_ = 0.0;
  double total_ = 0.0;
  bool constant_;
  std::size_t last_edge_ = 0;
};

struct Trajectory {
  std::size_t r = 0;
  int N = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;   // event times; times.size() == events()
  std::vector<int> states;     // (events() + 1) x r counts, initial state first
  std::vector<std::size_t> edges;

  [[nodiscard]] std::size_t events() const noexcept { return times.size(); }
  [[nodiscard]] LatticePoint state(std::size_t k) const;
  /// State in force at time t (right-continuous).
  [[nodiscard]] LatticePoint state_at(double t) const;
  /// One row per state: t, from, to, n0..n{r-1}; the initial row has from = to = -1.
  void write_csv(std::ostream& out, const EdgeSet& edge_set) const;
};

[[nodiscard]] Trajectory simulate(const Model& m, int N, const LatticePoint& init, double horizon,
                                  std::uint64_t seed);

/// Occupation time per cell. Cells are exact lattice points when r <= 3 and
/// N <= 400, otherwise the nearest point of the simplex grid of the given resolution.
class OccupationMeasure {
 public:
  OccupationMeasure() = default;
  OccupationMeasure(std::size_t r, int N, int cell_resolution = 50);

  void add(const std::vector<int>& counts, double dt);
  void merge(const OccupationMeasure& other);

  [[nodiscard]] bool exact_lattice() const noexcept { return exact_; }
  [[nodiscard]] std::size_t r() const noexcept { return r_; }
  [[nodiscard]] int N() const noexcept { return N_; }
  [[nodiscard]] int cell_resolution() const noexcept { return exact_ ? N_ : resolution_; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }

  /// Cells with positive occupation, in lexicographic order of their counts.
  [[nodiscard]] std::vector<std::pair<std::vector<int>, double>> entries() const;
  [[nodiscard]] std::vector<std::pair<std::vector<int>, double>> normalized() const;

  /// Occupied cell with the largest time.
  [[nodiscard]] std::vector<int> mode() const;
  /// Fraction of time spent in cells whose centre lies in the closed L1 ball.
  [[nodiscard]] double ball_probability(const SimplexPoint& center, double radius) const;

  /// cell counts, time, probability; one row per occupied cell.
  void write_csv(std::ostream& out) const;

 private:
  [[nodiscard]] std::size_t dense_index(const std::vector<int>& counts) const;

  std::size_t r_ = 0;
  int N_ = 0;
  int resolution_ = 0;
  bool exact_ = true;
  double horizon_ = 0.0;
  std::vector<double> dense_;
  std::map<std::vector<int>, double> cells_;
};

struct StationaryOptions {
  double burn_in = -1.0;   // negative: default_burn_in(m)
  double sample = 1000.0;
  std::uint64_t seed = 1;
  int replicas = 1;
  int cell_resolution = 50;
  std::optional<LatticePoint> init;  // default: nearest lattice point to the uniform measure
};

[[nodiscard]] OccupationMeasure stationary_histogram(const Model& m, int N, const StationaryOptions& opts);

/// 10 x the relaxation time 1 / |Re eigenvalue| of the McKean-Vlasov linearization at
/// the stable equilibrium nearest to `from` (uniform measure when absent).
[[nodiscard]] double default_burn_in(const Model& m, const std::optional<SimplexPoint>& from = std::nullopt);

struct SlopeEstimate {
  std::vector<int> N;
  std::vector<double> p_hat;
  std::vector<double> sample_time;
  std::vector<std::size_t> ball_entries;  // entries into the ball, a proxy for effective samples
  bool one_sided = false;
  double slope = 0.0;       // least-squares slope of -log p_hat against N
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;      // 95% band on the slope
  double ci_high = 0.0;
  double lower_bound = 0.0; // when one_sided: a lower bound on -(1/N) log p at the zero-mass N
};

/// Least-squares fit of y against x with a 95% t-band on the slope.
[[nodiscard]] SlopeEstimate fit_slope(const std::vector<int>& N, const std::vector<double>& p);

struct SlopeOptions {
  double burn_in = -1.0;
  std::vector<double> sample{1000.0};  // one value per N, or one value for all
  std::uint64_t seed = 1;
  int replicas = 1;
};

[[nodiscard]] SlopeEstimate ldp_slope(const Model& m, const SimplexPoint& target, double radius,
                                      const std::vector<int>& N_list, const SlopeOptions& opts);

}  // namespace mfldp
