#include "mfldp/quasipotential.hpp"

#include "mfldp/errors.hpp"
#include "mfldp/parallel.hpp"
#include "mfldp/rng.hpp"
#include "format.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

namespace mfldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxEnumeratedClasses = 7;

PathGrid with_duration(const PathGrid& p, double T) {
  PathGrid out = p;
  const double t0 = p.times.front();
  const double scale = T / p.duration();
  for (auto& t : out.times) {
    t = (t - t0) * scale;
  }
  out.times.back() = T;
  return out;
}

PathGrid resample(const PathGrid& p, int K, double T) {
  PathGrid out;
  const double t0 = p.times.front();
  const double D = p.duration();
  for (int k = 0; k <= K; ++k) {
    const double s = static_cast<double>(k) / K;
    out.times.push_back(s * T);
    out.points.push_back(k == 0 ? p.points.front() : (k == K ? p.points.back() : p.at(t0 + s * D)));
  }
  return out;
}

Vector flatten(const std::vector<Vector>& knots, std::size_t first, std::size_t last) {
  const auto r = knots.front().size();
  Vector x(static_cast<Eigen::Index>(last - first) * r);
  for (std::size_t k = first; k < last; ++k) {
    x.segment(static_cast<Eigen::Index>(k - first) * r, r) = knots[k];
  }
  return x;
}

}  // namespace

double PathPenalty::value(const Vector& mu) const {
  if (empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (const auto& c : centers) {
    const double s = (mu - c).squaredNorm() / (radius * radius);
    if (s < 1.0) {
      total += (1.0 - s) * (1.0 - s);
    }
  }
  return weight * total;
}

Vector PathPenalty::gradient(const Vector& mu) const {
  Vector g = Vector::Zero(mu.size());
  if (empty()) {
    return g;
  }
  for (const auto& c : centers) {
    const double s = (mu - c).squaredNorm() / (radius * radius);
    if (s < 1.0) {
      g -= weight * 4.0 * (1.0 - s) / (radius * radius) * (mu - c);
    }
  }
  return g;
}

namespace {

double resolved_substep(const Model& m, const Vector& nu, const Vector& xi, double requested) {
  if (requested >= 0.0) {
    return requested;
  }
  const double total = std::max(m.edge_rates(nu).sum(), m.edge_rates(xi).sum());
  return total > 0.0 ? 0.25 / total : 0.0;
}

}  // namespace

PathObjective path_objective(const Model& m, const PathGrid& path, const OptimizeOptions& opts_in) {
  OptimizeOptions opts = opts_in;
  opts.max_substep = resolved_substep(m, path.points.front(), path.points.back(), opts_in.max_substep);
  const EdgeSet& edges = m.edges();
  const auto r = static_cast<Eigen::Index>(m.r());
  const auto E = static_cast<Eigen::Index>(edges.size());
  PathObjective out;
  out.gradient.assign(path.points.size(), Vector::Zero(r));
  Vector rates_plus(E);
  Vector rates_minus(E);
  Matrix dlambda(E, r);
  for (std::size_t k = 0; k + 1 < path.points.size(); ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    Vector v = (path.points[k + 1] - path.points[k]) / dt;
    v.array() -= v.mean();
    for (const auto& [a, w] : segment_nodes(dt, opts.max_substep)) {
      const double h = w * dt;
      const Vector mid = (1.0 - a) * path.points[k] + a * path.points[k + 1];
      const Vector lambda = m.edge_rates(mid);
      const SliceSolution s = solve_slice(edges, mid, lambda, v, opts.slice);
      if (!s.feasible) {
        out.action = kInf;
        return out;
      }
      out.action += h * s.cost;

      if (!m.constant_rates()) {
        for (Eigen::Index i = 0; i < r; ++i) {
          constexpr double eps = 1e-7;
          Vector hi = mid;
          Vector lo = mid;
          hi[i] += eps;
          const bool central = mid[i] >= eps;
          if (central) {
            lo[i] -= eps;
          }
          m.edge_rates(std::span<const double>(hi.data(), static_cast<std::size_t>(r)),
                       std::span<double>(rates_plus.data(), static_cast<std::size_t>(E)));
          m.edge_rates(std::span<const double>(lo.data(), static_cast<std::size_t>(r)),
                       std::span<double>(rates_minus.data(), static_cast<std::size_t>(E)));
          dlambda.col(i) = (rates_plus - rates_minus) / (central ? 2 * eps : eps);
        }
      }
      Vector dxi = Vector::Zero(r);
      for (Eigen::Index e = 0; e < E; ++e) {
        const auto& edge = edges[static_cast<std::size_t>(e)];
        const double tilt = std::expm1(s.phi[edge.to] - s.phi[edge.from]);
        if (mid[edge.from] >= opts.slice.floor) {
          dxi[edge.from] -= lambda[e] * tilt;
        }
        if (!m.constant_rates()) {
          dxi -= std::max(mid[edge.from], opts.slice.floor) * tilt * dlambda.row(e).transpose();
        }
      }
      if (!opts.penalty.empty()) {
        out.penalty += h * opts.penalty.value(mid);
        dxi += opts.penalty.gradient(mid);
      }
      out.gradient[k] += (1.0 - a) * h * dxi - w * s.phi;
      out.gradient[k + 1] += a * h * dxi + w * s.phi;
    }
  }
  for (auto& g : out.gradient) {
    g.array() -= g.mean();
  }
  return out;
}

PathGrid construction_path(const Model& m, const Vector& nu, const Vector& xi, int K, double T) {
  const Construction c = constant_velocity_controls(m, nu, xi, T, 1.0, 1.0);
  PathGrid p;
  for (int k = 0; k <= K; ++k) {
    const double t = T * k / K;
    p.times.push_back(t);
    p.points.push_back(k == 0 ? nu : (k == K ? xi : c.controls.state_at(t)));
  }
  return p;
}

OptimizedPath optimize_path(const Model& m, const Vector& nu, const Vector& xi, int K, double T,
                            const std::optional<PathGrid>& init, const OptimizeOptions& opts_in) {
  OptimizeOptions opts = opts_in;
  opts.max_substep = resolved_substep(m, nu, xi, opts_in.max_substep);
  if (K < 2 || !(T > 0.0)) {
    throw std::invalid_argument("optimize_path: need K >= 2 and T > 0");
  }
  PathGrid path = init ? resample(*init, K, T) : construction_path(m, nu, xi, K, T);
  path.points.front() = nu;
  path.points.back() = xi;
  const auto r = static_cast<Eigen::Index>(m.r());
  const std::size_t n_inner = static_cast<std::size_t>(K) - 1;

  auto project = [&](const Vector& x) {
    PathGrid p = path;
    for (std::size_t k = 0; k < n_inner; ++k) {
      p.points[k + 1] = project_to_simplex(x.segment(static_cast<Eigen::Index>(k) * r, r), opts.knot_floor);
    }
    return p;
  };
  Vector x = flatten(path.points, 1, n_inner + 1);
  path = project(x);
  x = flatten(path.points, 1, n_inner + 1);

  PathObjective obj = path_objective(m, path, opts);
  double J = obj.action + obj.penalty;
  if (!std::isfinite(J)) {
    const PathCost pc = path_cost(m, path, opts.slice, opts.max_substep);
    throw NumericalError("optimize_path: initial path has infinite cost (" + pc.diagnosis + ")");
  }
  Vector g = flatten(obj.gradient, 1, n_inner + 1);

  OptimizedPath out;
  out.history.push_back(J);
  std::deque<Vector> S;
  std::deque<Vector> Y;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (J == 0.0 || g.cwiseAbs().maxCoeff() <= 1e-15) {
      out.converged = true;
      break;
    }
    Vector d = -g;
    if (!S.empty()) {
      std::vector<double> a(S.size());
      for (std::size_t k = S.size(); k-- > 0;) {
        a[k] = S[k].dot(d) / Y[k].dot(S[k]);
        d -= a[k] * Y[k];
      }
      d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
      for (std::size_t k = 0; k < S.size(); ++k) {
        const double b = Y[k].dot(d) / Y[k].dot(S[k]);
        d += (a[k] - b) * S[k];
      }
      if (!(g.dot(d) < 0.0)) {
        S.clear();
        Y.clear();
        d = -g;
      }
    }
    if (S.empty()) {
      d *= std::min(1.0, 0.02 / d.cwiseAbs().maxCoeff());
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 50; ++ls, alpha *= 0.5) {
      const PathGrid cand = project(x + alpha * d);
      const Vector xc = flatten(cand.points, 1, n_inner + 1);
      const Vector step = xc - x;
      if (step.cwiseAbs().maxCoeff() == 0.0) {
        break;
      }
      PathObjective co = path_objective(m, cand, opts);
      const double Jc = co.action + co.penalty;
      if (std::isfinite(Jc) && Jc <= J + 1e-4 * g.dot(step)) {
        const Vector gc = flatten(co.gradient, 1, n_inner + 1);
        const Vector y = gc - g;
        if (step.dot(y) > 1e-16 * step.norm() * y.norm()) {
          S.push_back(step);
          Y.push_back(y);
          if (S.size() > static_cast<std::size_t>(opts.memory)) {
            S.pop_front();
            Y.pop_front();
          }
        }
        x = xc;
        g = gc;
        J = Jc;
        path = cand;
        obj = std::move(co);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!S.empty()) {
        S.clear();
        Y.clear();
        continue;
      }
      out.converged = true;
      break;
    }
    out.history.push_back(J);
    const auto n = out.history.size();
    if (n > static_cast<std::size_t>(opts.window) &&
        out.history[n - 1 - static_cast<std::size_t>(opts.window)] - J <=
            opts.relative_tolerance * std::max(std::abs(J), 1e-300)) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.path = std::move(path);
  out.cost = obj.action;
  out.penalty = obj.penalty;
  out.max_substep = opts.max_substep;
  return out;
}

QuasipotentialResult quasipotential(const Model& m, const Vector& nu, const Vector& xi,
                                    const QuasipotentialOptions& opts) {
  if (!(opts.T_min > 0.0) || !(opts.T_max > opts.T_min)) {
    throw std::invalid_argument("quasipotential: need 0 < T_min < T_max");
  }
  QuasipotentialResult res;
  if (l1_distance(nu, xi) == 0.0) {
    res.path.times = {0.0, opts.T_min};
    res.path.points = {nu, xi};
    res.T = opts.T_min;
    return res;
  }

  std::optional<OptimizedPath> best;
  double best_T = 0.0;
  auto objective = [](const OptimizedPath& p) { return p.cost + p.penalty; };
  auto consider = [&](OptimizedPath p, double T) {
    if (!best || objective(p) < objective(*best)) {
      best = std::move(p);
      best_T = T;
    }
  };
  auto run = [&](double T, const std::optional<PathGrid>& init) {
    OptimizedPath p = optimize_path(m, nu, xi, opts.K, T, init, opts.optimizer);
    const double f = objective(p);
    res.T_trace.emplace_back(T, f);
    consider(std::move(p), T);
    return f;
  };
  auto warm = [&](double T) -> std::optional<PathGrid> {
    if (!best) {
      return std::nullopt;
    }
    return with_duration(best->path, T);
  };

  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(opts.T_min);
  double hi = std::log(opts.T_max);
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = run(std::exp(c), warm(std::exp(c)));
  double fd = run(std::exp(d), warm(std::exp(d)));
  for (int k = 0; k < opts.golden_iterations; ++k) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = run(std::exp(c), warm(std::exp(c)));
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = run(std::exp(d), warm(std::exp(d)));
    }
  }

  for (double alpha : {2.0, 0.5}) {
    const double T = best_T / alpha;
    if (T < opts.T_min || T > opts.T_max) {
      continue;
    }
    run(T, with_duration(best->path, T));
  }

  const double T_star = best_T;
  const PathGrid incumbent = best->path;
  std::vector<std::optional<OptimizedPath>> restarts(static_cast<std::size_t>(std::max(0, opts.restarts)));
  const Philox4x32 base(opts.seed, 0x7170);
  parallel_for(
      restarts.size(),
      [&](std::size_t i) {
        Philox4x32 rng = base.split(i);
        PathGrid start = incumbent;
        for (std::size_t k = 1; k + 1 < start.points.size(); ++k) {
          Vector z(start.points[k].size());
          for (auto& v : z) {
            const double u1 = rng.uniform01();
            const double u2 = rng.uniform01();
            v = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
          }
          z.array() -= z.mean();
          const double norm = z.cwiseAbs().sum();
          if (norm > 0.0) {
            start.points[k] = project_to_simplex(start.points[k] + opts.restart_scale / norm * z,
                                                 opts.optimizer.knot_floor);
          }
        }
        try {
          restarts[i] = optimize_path(m, nu, xi, opts.K, T_star, start, opts.optimizer);
        } catch (const NumericalError&) {
        }
      },
      static_cast<std::size_t>(std::max(0, opts.threads)));
  double lo_cost = objective(*best);
  double hi_cost = lo_cost;
  for (auto& r : restarts) {
    if (!r) {
      continue;
    }
    const double f = objective(*r);
    res.restart_costs.push_back(f);
    lo_cost = std::min(lo_cost, f);
    hi_cost = std::max(hi_cost, f);
    consider(std::move(*r), T_star);
  }
  res.restart_spread = hi_cost - lo_cost;

  res.V = best->cost;
  res.penalty = best->penalty;
  res.path = best->path;
  res.T = best_T;
  res.at_T_max = std::log(opts.T_max) - std::log(best_T) < 1e-2;
  if (res.at_T_max) {
    res.warning = "optimal duration reached T_max = " + detail::format_double(opts.T_max);
  }
  return res;
}

VTildeResult v_tilde_matrix(const Model& m, const std::vector<Vector>& reps, const VTildeOptions& opts) {
  const auto l = static_cast<Eigen::Index>(reps.size());
  VTildeResult out;
  out.V = Matrix::Zero(l, l);
  out.paths.assign(reps.size(), std::vector<QuasipotentialResult>(reps.size()));
  if (l == 0) {
    return out;
  }
  double least = kInf;
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = i + 1; j < l; ++j) {
      least = std::min(least, (reps[static_cast<std::size_t>(i)] - reps[static_cast<std::size_t>(j)]).norm());
    }
  }
  out.exclusion_radius = opts.exclusion_radius > 0.0 ? opts.exclusion_radius : 0.5 * least;
  out.penalty_weight = opts.penalty_weight > 0.0 ? opts.penalty_weight : 1e3 * validate_model(m).C_hat;

  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = 0; j < l; ++j) {
      if (i == j) {
        continue;
      }
      QuasipotentialOptions qp = opts.qp;
      qp.optimizer.penalty.centers.clear();
      for (Eigen::Index k = 0; k < l; ++k) {
        if (k != i && k != j) {
          qp.optimizer.penalty.centers.push_back(reps[static_cast<std::size_t>(k)]);
        }
      }
      qp.optimizer.penalty.radius = out.exclusion_radius;
      qp.optimizer.penalty.weight = out.penalty_weight;
      auto res = quasipotential(m, reps[static_cast<std::size_t>(i)], reps[static_cast<std::size_t>(j)], qp);
      const bool pinned = res.penalty > opts.activation * std::max(res.V, 1e-12);
      out.V(i, j) = pinned ? kInf : res.V;
      out.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(res);
    }
  }
  return out;
}

Matrix v_matrix(const Matrix& vtilde) {
  if (vtilde.rows() != vtilde.cols()) {
    throw std::invalid_argument("v_matrix: square matrix required");
  }
  Matrix V = vtilde;
  const auto l = V.rows();
  for (Eigen::Index k = 0; k < l; ++k) {
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index j = 0; j < l; ++j) {
        V(i, j) = std::min(V(i, j), V(i, k) + V(k, j));
      }
    }
  }
  return V;
}

FWWeights fw_weights(const Matrix& V) {
  const auto l = static_cast<int>(V.rows());
  if (V.cols() != V.rows() || l == 0) {
    throw std::invalid_argument("fw_weights: nonempty square matrix required");
  }
  if (l > kMaxEnumeratedClasses) {
    throw NumericalError("fw_weights: " + std::to_string(l) + " classes exceed the enumeration limit of " +
                         std::to_string(kMaxEnumeratedClasses) +
                         "; a minimum-arborescence solver is needed for larger catalogues");
  }
  FWWeights out;
  out.W = Vector::Constant(l, kInf);
  out.graph_counts.assign(static_cast<std::size_t>(l), 0);
  out.best_graph.assign(static_cast<std::size_t>(l), std::vector<int>(static_cast<std::size_t>(l), -1));
  for (int root = 0; root < l; ++root) {
    std::vector<int> others;
    for (int v = 0; v < l; ++v) {
      if (v != root) {
        others.push_back(v);
      }
    }
    // choice[q] indexes the successor of others[q] among the l - 1 vertices other than itself
    std::vector<int> choice(others.size(), 0);
    std::vector<int> succ(static_cast<std::size_t>(l), -1);
    bool found = false;
    while (true) {
      for (std::size_t q = 0; q < others.size(); ++q) {
        const int v = others[q];
        succ[static_cast<std::size_t>(v)] = choice[q] < v ? choice[q] : choice[q] + 1;
      }
      bool acyclic = true;
      for (int v : others) {
        int at = v;
        int steps = 0;
        while (at != root && steps <= l) {
          at = succ[static_cast<std::size_t>(at)];
          ++steps;
        }
        if (at != root) {
          acyclic = false;
          break;
        }
      }
      if (acyclic) {
        ++out.graph_counts[static_cast<std::size_t>(root)];
        double w = 0.0;
        for (int v : others) {
          w += V(v, succ[static_cast<std::size_t>(v)]);
        }
        if (!found || w < out.W[root]) {
          found = true;
          out.W[root] = w;
          out.best_graph[static_cast<std::size_t>(root)] = succ;
          out.best_graph[static_cast<std::size_t>(root)][static_cast<std::size_t>(root)] = -1;
        }
      }
      std::size_t q = 0;
      while (q < choice.size() && ++choice[q] == l - 1) {
        choice[q] = 0;
        ++q;
      }
      if (q == choice.size()) {
        break;
      }
    }
    if (others.empty()) {
      out.graph_counts[static_cast<std::size_t>(root)] = 1;
      out.W[root] = 0.0;
    }
  }
  const double least = out.W.minCoeff();
  out.s = out.W.array() - least;
  return out;
}

FWCatalog fw_catalog(const Model& m, const FWOptions& opts) {
  FWCatalog fw;
  fw.qp = opts.vtilde.qp;
  fw.catalog = find_equilibria(m, opts.equilibria);
  if (fw.catalog.l() == 0) {
    throw UnsupportedDynamics("no stable equilibrium found; the catalogue has " +
                              std::to_string(fw.catalog.equilibria.size()) + " points");
  }
  if (fw.catalog.unresolved > 0) {
    fw.warnings.push_back(std::to_string(fw.catalog.unresolved) +
                          " integration endpoints did not converge to an equilibrium");
  }
  if (opts.check_omega) {
    const OmegaLimitReport omega = omega_limit_check(m, fw.catalog);
    if (omega.flagged) {
      std::string where;
      for (Eigen::Index k = 0; k < omega.offending_endpoints.front().size(); ++k) {
        where += (k ? "," : "") + detail::format_double(omega.offending_endpoints.front()[k]);
      }
      throw UnsupportedDynamics("flow from " + std::to_string(omega.offending_starts.size()) +
                                " grid starts does not settle on a catalogued equilibrium (e.g. endpoint (" + where +
                                "), L1 distance " + detail::format_double(omega.max_endpoint_distance) + ")");
    }
  }
  for (const auto& p : fw.catalog.stable_points()) {
    fw.reps.push_back(p.weights());
  }
  if (fw.reps.size() > static_cast<std::size_t>(kMaxEnumeratedClasses)) {
    throw NumericalError("fw_catalog: " + std::to_string(fw.reps.size()) +
                         " stable classes exceed the enumeration limit of 7");
  }
  const VTildeResult vt = v_tilde_matrix(m, fw.reps, opts.vtilde);
  fw.Vtilde = vt.V;
  fw.V = v_matrix(fw.Vtilde);
  fw.weights = fw_weights(fw.V);
  for (std::size_t i = 0; i < vt.paths.size(); ++i) {
    for (std::size_t j = 0; j < vt.paths.size(); ++j) {
      if (!vt.paths[i][j].warning.empty()) {
        fw.warnings.push_back("V(" + std::to_string(i) + "," + std::to_string(j) + "): " + vt.paths[i][j].warning);
      }
    }
  }
  return fw;
}

double rate_function(const Model& m, const FWCatalog& fw, const Vector& xi) {
  double best = kInf;
  for (std::size_t i = 0; i < fw.reps.size(); ++i) {
    const double si = fw.weights.s[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(si) || si >= best) {
      continue;
    }
    best = std::min(best, si + quasipotential(m, fw.reps[i], xi, fw.qp).V);
  }
  return best;
}

}  // namespace mfldp
