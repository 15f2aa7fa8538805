#include "mfldp/particle_sim.hpp"

#include "mfldp/errors.hpp"
#include "mfldp/mckean_vlasov.hpp"
#include "mfldp/parallel.hpp"
#include "format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mfldp {

namespace {

// Two-sided 95% Student t quantiles for 1..30 degrees of freedom.
constexpr double kT975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                            2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                            2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

double t_quantile_975(std::size_t df) {
  if (df == 0) {
    return std::numeric_limits<double>::infinity();
  }
  return df <= 30 ? kT975[df - 1] : 1.96;
}

// Runs the chain over [start, end) and reports the overlap of every holding interval
// with the window [window_start, end).
template <class Observer>
void run_window(Simulator& sim, double window_start, double end, Observer&& observe) {
  for (;;) {
    const double t0 = sim.time();
    if (t0 >= end) {
      return;
    }
    observe.before(sim.counts());
    const double dt = sim.step();
    const double t1 = t0 + dt;
    const double overlap = std::min(t1, end) - std::max(t0, window_start);
    if (overlap > 0.0) {
      observe.hold(overlap);
    }
  }
}

}  // namespace

LatticePoint::LatticePoint(std::vector<int> c) : counts(std::move(c)) {
  N = 0;
  for (int k : counts) {
    if (k < 0) {
      throw std::invalid_argument("lattice point with negative count");
    }
    N += k;
  }
}

LatticePoint LatticePoint::nearest(const SimplexPoint& mu, int N) {
  const std::size_t r = mu.size();
  std::vector<int> counts(r);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < r; ++k) {
    const double exact = mu[k] * N;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < N; ++k, ++assigned) {
    ++counts[remainders[k % r].second];
  }
  return LatticePoint(std::move(counts));
}

SimplexPoint LatticePoint::measure() const { return SimplexPoint(as_vector()); }

Vector LatticePoint::as_vector() const {
  Vector v(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k) {
    v[static_cast<Eigen::Index>(k)] = static_cast<double>(counts[k]) / N;
  }
  return v;
}

Simulator::Simulator(const Model& m, const LatticePoint& init, Philox4x32 rng)
    : model_(m),
      edges_(m.edges().begin(), m.edges().end()),
      counts_(init.counts),
      mu_(m.r()),
      lambda_(m.edges().size()),
      propensity_(m.edges().size()),
      rng_(rng),
      N_(init.N),
      inv_N_(1.0 / init.N),
      constant_(m.constant_rates()) {
  if (init.counts.size() != m.r()) {
    throw std::invalid_argument("initial state has the wrong number of states");
  }
  if (init.N < 1) {
    throw std::invalid_argument("simulation needs N >= 1");
  }
  if (constant_) {
    std::fill(mu_.begin(), mu_.end(), 1.0 / static_cast<double>(m.r()));
    model_.edge_rates(mu_, lambda_);
  }
}

void Simulator::refresh_propensities() {
  if (!constant_) {
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      mu_[k] = counts_[k] * inv_N_;
    }
    model_.edge_rates(mu_, lambda_);
  }
  double total = 0.0;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const double p = counts_[static_cast<std::size_t>(edges_[e].from)] * lambda_[e];
    propensity_[e] = p;
    total += p;
  }
  total_ = total;
}

double Simulator::total_rate() {
  refresh_propensities();
  return total_;
}

double Simulator::step() {
  refresh_propensities();
  if (!(total_ > 0.0)) {
    throw NumericalError("total jump rate is zero; the model violates irreducibility or positivity");
  }
  const double dt = -std::log(rng_.uniform01()) / total_;
  const double target = rng_.uniform01() * total_;
  double acc = 0.0;
  std::size_t chosen = edges_.size() - 1;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    acc += propensity_[e];
    if (target < acc) {
      chosen = e;
      break;
    }
  }
  // Round-off can leave target beyond the last positive propensity.
  while (propensity_[chosen] <= 0.0) {
    --chosen;
  }
  --counts_[static_cast<std::size_t>(edges_[chosen].from)];
  ++counts_[static_cast<std::size_t>(edges_[chosen].to)];
  last_edge_ = chosen;
  time_ += dt;
  return dt;
}

Jump gillespie_step(const Model& m, const LatticePoint& state, Philox4x32& rng) {
  Simulator sim(m, state, rng);
  Jump jump;
  jump.holding_time = sim.step();
  jump.next = LatticePoint(sim.counts());
  jump.edge = sim.last_edge();
  // Keep the caller's stream advancing as if the draws were made on it directly.
  rng.uniform01();
  rng.uniform01();
  return jump;
}

LatticePoint Trajectory::state(std::size_t k) const {
  return LatticePoint(std::vector<int>(states.begin() + static_cast<std::ptrdiff_t>(k * r),
                                       states.begin() + static_cast<std::ptrdiff_t>((k + 1) * r)));
}

LatticePoint Trajectory::state_at(double t) const {
  const auto k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  return state(k);
}

void Trajectory::write_csv(std::ostream& out, const EdgeSet& edge_set) const {
  out << "t,from,to";
  for (std::size_t k = 0; k < r; ++k) {
    out << ",n" << k;
  }
  out << "\n";
  for (std::size_t n = 0; n <= events(); ++n) {
    if (n == 0) {
      out << "0,-1,-1";
    } else {
      const Edge& e = edge_set[edges[n - 1]];
      out << detail::format_double(times[n - 1]) << "," << e.from << "," << e.to;
    }
    for (std::size_t k = 0; k < r; ++k) {
      out << "," << states[n * r + k];
    }
    out << "\n";
  }
}

Trajectory simulate(const Model& m, int N, const LatticePoint& init, double horizon, std::uint64_t seed) {
  if (init.N != N) {
    throw std::invalid_argument("initial lattice point does not have N particles");
  }
  if (horizon < 0.0) {
    throw std::invalid_argument("simulate: negative horizon");
  }
  Trajectory traj;
  traj.r = m.r();
  traj.N = N;
  traj.horizon = horizon;
  traj.seed = seed;
  traj.states = init.counts;
  Simulator sim(m, init, Philox4x32(seed));
  for (;;) {
    const double dt = sim.step();
    if (sim.time() > horizon || dt <= 0.0) {
      break;
    }
    traj.times.push_back(sim.time());
    traj.edges.push_back(sim.last_edge());
    traj.states.insert(traj.states.end(), sim.counts().begin(), sim.counts().end());
  }
  return traj;
}

OccupationMeasure::OccupationMeasure(std::size_t r, int N, int cell_resolution)
    : r_(r), N_(N), resolution_(cell_resolution), exact_(r <= 3 && N <= 400) {
  if (r == 0 || N < 1) {
    throw std::invalid_argument("occupation measure needs r >= 1 and N >= 1");
  }
  if (exact_) {
    std::size_t size = 1;
    for (std::size_t k = 0; k + 1 < r; ++k) {
      size *= static_cast<std::size_t>(N + 1);
    }
    dense_.assign(size, 0.0);
  } else if (cell_resolution < 1) {
    throw std::invalid_argument("occupation measure needs a positive cell resolution");
  }
}

std::size_t OccupationMeasure::dense_index(const std::vector<int>& counts) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k + 1 < r_; ++k) {
    idx = idx * static_cast<std::size_t>(N_ + 1) + static_cast<std::size_t>(counts[k]);
  }
  return idx;
}

void OccupationMeasure::add(const std::vector<int>& counts, double dt) {
  horizon_ += dt;
  if (exact_) {
    dense_[dense_index(counts)] += dt;
    return;
  }
  cells_[LatticePoint::nearest(LatticePoint(counts).measure(), resolution_).counts] += dt;
}

void OccupationMeasure::merge(const OccupationMeasure& other) {
  if (other.r_ != r_ || other.N_ != N_ || other.exact_ != exact_ || (!exact_ && other.resolution_ != resolution_)) {
    throw std::invalid_argument("cannot merge occupation measures over different cells");
  }
  horizon_ += other.horizon_;
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    dense_[i] += other.dense_[i];
  }
  for (const auto& [key, t] : other.cells_) {
    cells_[key] += t;
  }
}

std::vector<std::pair<std::vector<int>, double>> OccupationMeasure::entries() const {
  std::vector<std::pair<std::vector<int>, double>> out;
  if (!exact_) {
    out.assign(cells_.begin(), cells_.end());
    return out;
  }
  for (std::size_t idx = 0; idx < dense_.size(); ++idx) {
    if (dense_[idx] <= 0.0) {
      continue;
    }
    std::vector<int> counts(r_);
    std::size_t rest = idx;
    int used = 0;
    for (std::size_t k = r_ - 1; k-- > 0;) {
      counts[k] = static_cast<int>(rest % static_cast<std::size_t>(N_ + 1));
      rest /= static_cast<std::size_t>(N_ + 1);
      used += counts[k];
    }
    counts[r_ - 1] = N_ - used;
    out.emplace_back(std::move(counts), dense_[idx]);
  }
  return out;
}

std::vector<std::pair<std::vector<int>, double>> OccupationMeasure::normalized() const {
  auto out = entries();
  for (auto& [key, t] : out) {
    t /= horizon_;
  }
  return out;
}

std::vector<int> OccupationMeasure::mode() const {
  const auto all = entries();
  if (all.empty()) {
    throw std::logic_error("empty occupation measure");
  }
  return std::max_element(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

double OccupationMeasure::ball_probability(const SimplexPoint& center, double radius) const {
  if (!(horizon_ > 0.0)) {
    return 0.0;
  }
  const double scale = cell_resolution();
  double mass = 0.0;
  for (const auto& [key, t] : entries()) {
    double d = 0.0;
    for (std::size_t k = 0; k < r_; ++k) {
      d += std::abs(key[k] / scale - center[k]);
    }
    if (d <= radius + 1e-12) {
      mass += t;
    }
  }
  return mass / horizon_;
}

void OccupationMeasure::write_csv(std::ostream& out) const {
  for (std::size_t k = 0; k < r_; ++k) {
    out << "n" << k << ",";
  }
  out << "time,probability\n";
  for (const auto& [key, t] : entries()) {
    for (int c : key) {
      out << c << ",";
    }
    out << detail::format_double(t) << "," << detail::format_double(t / horizon_) << "\n";
  }
}

double default_burn_in(const Model& m, const std::optional<SimplexPoint>& from) {
  EquilibriumOptions opts;
  opts.starts = 8;
  const EquilibriumCatalog catalog = find_equilibria(m, opts);
  const Vector at = from ? from->weights() : SimplexPoint::uniform(m.r()).weights();
  return 10.0 * relaxation_time(catalog, at);
}

namespace {

struct HistogramObserver {
  OccupationMeasure& occ;
  std::vector<int> snapshot;
  void before(const std::vector<int>& counts) { snapshot = counts; }
  void hold(double dt) { occ.add(snapshot, dt); }
};

struct BallObserver {
  OccupationMeasure& occ;
  const SimplexPoint& center;
  double radius;
  int N;
  std::vector<int> snapshot;
  bool inside_prev = false;
  std::size_t entries = 0;
  void before(const std::vector<int>& counts) { snapshot = counts; }
  void hold(double dt) {
    occ.add(snapshot, dt);
    double d = 0.0;
    for (std::size_t k = 0; k < snapshot.size(); ++k) {
      d += std::abs(static_cast<double>(snapshot[k]) / N - center[k]);
    }
    const bool inside = d <= radius + 1e-12;
    if (inside && !inside_prev) {
      ++entries;
    }
    inside_prev = inside;
  }
};

LatticePoint initial_state(const Model& m, int N, const std::optional<LatticePoint>& init) {
  if (init) {
    if (init->N != N || init->counts.size() != m.r()) {
      throw std::invalid_argument("initial state does not match N or the state count");
    }
    return *init;
  }
  return LatticePoint::nearest(SimplexPoint::uniform(m.r()), N);
}

}  // namespace

OccupationMeasure stationary_histogram(const Model& m, int N, const StationaryOptions& opts) {
  if (!(opts.sample > 0.0) || opts.replicas < 1) {
    throw std::invalid_argument("stationary_histogram: need sample > 0 and replicas >= 1");
  }
  const double burn_in = opts.burn_in >= 0.0 ? opts.burn_in : default_burn_in(m);
  const LatticePoint init = initial_state(m, N, opts.init);
  const auto replicas = static_cast<std::size_t>(opts.replicas);
  std::vector<OccupationMeasure> parts(replicas);
  const Philox4x32 base(opts.seed);
  parallel_for(replicas, [&](std::size_t i) {
    OccupationMeasure occ(m.r(), N, opts.cell_resolution);
    Simulator sim(m, init, base.split(i));
    run_window(sim, burn_in, burn_in + opts.sample, HistogramObserver{occ, {}});
    parts[i] = std::move(occ);
  });
  OccupationMeasure total = std::move(parts[0]);
  for (std::size_t i = 1; i < replicas; ++i) {
    total.merge(parts[i]);
  }
  return total;
}

SlopeEstimate fit_slope(const std::vector<int>& N, const std::vector<double>& p) {
  if (N.size() != p.size() || N.size() < 2) {
    throw std::invalid_argument("fit_slope: need matching inputs with at least two points");
  }
  SlopeEstimate est;
  est.N = N;
  est.p_hat = p;
  const auto n = static_cast<double>(N.size());
  double mx = 0.0;
  double my = 0.0;
  std::vector<double> y(N.size());
  for (std::size_t k = 0; k < N.size(); ++k) {
    y[k] = -std::log(p[k]);
    mx += N[k] / n;
    my += y[k] / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < N.size(); ++k) {
    sxx += (N[k] - mx) * (N[k] - mx);
    sxy += (N[k] - mx) * (y[k] - my);
  }
  est.slope = sxy / sxx;
  est.intercept = my - est.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < N.size(); ++k) {
    const double res = y[k] - est.intercept - est.slope * N[k];
    rss += res * res;
  }
  const std::size_t df = N.size() - 2;
  est.slope_stderr = df > 0 ? std::sqrt(rss / static_cast<double>(df) / sxx) : 0.0;
  const double half = df > 0 ? t_quantile_975(df) * est.slope_stderr : 0.0;
  est.ci_low = est.slope - half;
  est.ci_high = est.slope + half;
  return est;
}

SlopeEstimate ldp_slope(const Model& m, const SimplexPoint& target, double radius, const std::vector<int>& N_list,
                        const SlopeOptions& opts) {
  if (N_list.size() < 3) {
    throw std::invalid_argument("ldp_slope: need at least three values of N");
  }
  if (!target.interior()) {
    throw std::invalid_argument("ldp_slope: target must lie in the simplex interior");
  }
  if (opts.sample.size() != 1 && opts.sample.size() != N_list.size()) {
    throw std::invalid_argument("ldp_slope: sample times must be one value or one per N");
  }
  double burn_in = opts.burn_in;
  double tau = 0.0;
  {
    EquilibriumOptions eo;
    eo.starts = 8;
    const EquilibriumCatalog catalog = find_equilibria(m, eo);
    tau = relaxation_time(catalog, target.weights());
    if (burn_in < 0.0) {
      burn_in = 10.0 * tau;
    }
  }
  const std::size_t count = N_list.size();
  const auto replicas = static_cast<std::size_t>(std::max(1, opts.replicas));
  std::vector<double> p(count);
  std::vector<double> sample(count);
  std::vector<std::size_t> entries(count);
  const Philox4x32 base(opts.seed);
  for (std::size_t k = 0; k < count; ++k) {
    const int N = N_list[k];
    sample[k] = opts.sample.size() == 1 ? opts.sample[0] : opts.sample[k];
    const LatticePoint init = LatticePoint::nearest(SimplexPoint::uniform(m.r()), N);
    const Philox4x32 stream = base.split(static_cast<std::uint64_t>(N));
    std::vector<OccupationMeasure> parts(replicas);
    std::vector<std::size_t> part_entries(replicas);
    parallel_for(replicas, [&](std::size_t i) {
      OccupationMeasure occ(m.r(), N);
      BallObserver obs{occ, target, radius, N, {}};
      Simulator sim(m, init, stream.split(i));
      run_window(sim, burn_in, burn_in + sample[k] / static_cast<double>(replicas), obs);
      part_entries[i] = obs.entries;
      parts[i] = std::move(occ);
    });
    OccupationMeasure total = std::move(parts[0]);
    for (std::size_t i = 1; i < replicas; ++i) {
      total.merge(parts[i]);
    }
    p[k] = total.ball_probability(target, radius);
    entries[k] = std::accumulate(part_entries.begin(), part_entries.end(), std::size_t{0});
  }

  const bool any_zero = std::any_of(p.begin(), p.end(), [](double v) { return !(v > 0.0); });
  SlopeEstimate est;
  if (!any_zero) {
    est = fit_slope(N_list, p);
  } else {
    est.N = N_list;
    est.p_hat = p;
    est.one_sided = true;
    est.slope = std::numeric_limits<double>::quiet_NaN();
    est.lower_bound = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
      if (p[k] > 0.0) {
        continue;
      }
      // Rule of three over the sample / relaxation-time independent blocks.
      const double p_upper = std::min(1.0, 3.0 * tau / sample[k]);
      est.lower_bound = std::min(est.lower_bound, -std::log(p_upper) / N_list[k]);
    }
  }
  est.sample_time = sample;
  est.ball_entries = entries;
  return est;
}

}  // namespace mfldp
