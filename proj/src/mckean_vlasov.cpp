#include "mfldp/mckean_vlasov.hpp"

#include "mfldp/errors.hpp"
#include "mfldp/parallel.hpp"
#include "mfldp/rng.hpp"
#include "format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mfldp {

namespace {

constexpr double kClipLimit = 1e-6;
constexpr int kMaxHalvings = 20;
constexpr double kResidualTol = 1e-10;
constexpr int kNewtonIterations = 100;
constexpr double kMaxDefaultHorizon = 1e4;

struct StepStats {
  double max_clip = 0.0;
  int max_depth = 0;
};

Vector advance(const Model& m, const Vector& mu, double dt, int depth, StepStats& stats) {
  Vector next = rk4_step(m, mu, dt);
  const double clip = std::max(0.0, -next.minCoeff());
  if (clip > kClipLimit || !next.allFinite()) {
    if (depth >= kMaxHalvings) {
      throw NumericalError("integration step rejected after " + std::to_string(kMaxHalvings) + " halvings");
    }
    const Vector half = advance(m, mu, dt / 2, depth + 1, stats);
    return advance(m, half, dt / 2, depth + 1, stats);
  }
  stats.max_clip = std::max(stats.max_clip, clip);
  stats.max_depth = std::max(stats.max_depth, depth);
  next = next.cwiseMax(0.0);
  return next / next.sum();
}

double default_horizon(const Model& m) {
  return std::min(kMaxDefaultHorizon, 50.0 / validate_model(m).c_hat);
}

Vector random_simplex_point(std::size_t r, Philox4x32& rng) {
  Vector x(static_cast<Eigen::Index>(r));
  for (auto& v : x) {
    v = -std::log(rng.uniform01());
  }
  return x / x.sum();
}

double drift_norm(const Model& m, const Vector& x) {
  try {
    return drift(m, x).cwiseAbs().maxCoeff();
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

void OdePath::write_csv(std::ostream& out) const {
  const auto r = points.empty() ? 0 : points.front().size();
  out << "t";
  for (Eigen::Index k = 0; k < r; ++k) {
    out << ",mu" << k;
  }
  out << "\n";
  for (std::size_t n = 0; n < times.size(); ++n) {
    out << detail::format_double(times[n]);
    for (Eigen::Index k = 0; k < r; ++k) {
      out << "," << detail::format_double(points[n][k]);
    }
    out << "\n";
  }
}

Vector rk4_step(const Model& m, const Vector& mu, double dt) {
  const Vector k1 = drift(m, mu);
  const Vector k2 = drift(m, mu + 0.5 * dt * k1);
  const Vector k3 = drift(m, mu + 0.5 * dt * k2);
  const Vector k4 = drift(m, mu + dt * k3);
  return mu + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

OdePath integrate(const Model& m, const SimplexPoint& nu, double horizon, double dt) {
  if (!(dt > 0.0) || horizon < 0.0) {
    throw std::invalid_argument("integrate: need dt > 0 and horizon >= 0");
  }
  OdePath path;
  path.dt = dt;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  path.times.reserve(steps + 1);
  path.points.reserve(steps + 1);
  path.times.push_back(0.0);
  path.points.push_back(nu.weights());
  StepStats stats;
  Vector mu = nu.weights();
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = std::min(horizon, static_cast<double>(n) * dt);
    mu = advance(m, mu, t - path.times.back(), 0, stats);
    path.times.push_back(t);
    path.points.push_back(mu);
  }
  path.max_clip = stats.max_clip;
  path.max_halvings = stats.max_depth;
  return path;
}

Vector integrate_endpoint(const Model& m, const Vector& nu, double horizon, double dt) {
  StepStats stats;
  Vector mu = nu;
  double t = 0.0;
  while (t < horizon - 1e-12) {
    const double h = std::min(dt, horizon - t);
    mu = advance(m, mu, h, 0, stats);
    t += h;
  }
  return mu;
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Saddle: return "saddle";
    case Stability::Undetermined: return "undetermined";
  }
  return "undetermined";
}

std::size_t EquilibriumCatalog::l() const {
  return static_cast<std::size_t>(std::count_if(equilibria.begin(), equilibria.end(),
                                                [](const Equilibrium& e) { return e.stability == Stability::Stable; }));
}

std::vector<SimplexPoint> EquilibriumCatalog::stable_points() const {
  std::vector<SimplexPoint> out;
  for (const auto& e : equilibria) {
    if (e.stability == Stability::Stable) {
      out.push_back(e.point);
    }
  }
  return out;
}

std::size_t EquilibriumCatalog::nearest(const Vector& mu) const {
  if (equilibria.empty()) {
    throw std::logic_error("empty equilibrium catalogue");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < equilibria.size(); ++k) {
    const double d = l1_distance(equilibria[k].point.weights(), mu);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Matrix tangent_jacobian(const Model& m, const Vector& xi) {
  constexpr double h = 1e-6;
  const Matrix basis = tangent_basis(m.r());
  Matrix full(basis.rows(), basis.cols());
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    full.col(k) = (drift(m, xi + h * basis.col(k)) - drift(m, xi - h * basis.col(k))) / (2 * h);
  }
  return basis.transpose() * full;
}

std::optional<Vector> newton_equilibrium(const Model& m, const Vector& start) {
  const Matrix basis = tangent_basis(m.r());
  Vector x = project_to_simplex(start);
  try {
    for (int it = 0; it <= kNewtonIterations; ++it) {
      const Vector f = drift(m, x);
      const double res = f.cwiseAbs().maxCoeff();
      if (res <= kResidualTol) {
        return x;
      }
      if (it == kNewtonIterations) {
        break;
      }
      const Matrix j = tangent_jacobian(m, x);
      const Vector dx = j.fullPivLu().solve(-(basis.transpose() * f));
      if (!dx.allFinite()) {
        return std::nullopt;
      }
      const Vector step = basis * dx;
      const double f_norm = f.norm();
      double alpha = 1.0;
      bool accepted = false;
      while (alpha > 1e-10) {
        const Vector cand = project_to_simplex(x + alpha * step);
        double cand_norm = std::numeric_limits<double>::infinity();
        try {
          cand_norm = drift(m, cand).norm();
        } catch (const DomainError&) {
        }
        if (cand_norm < (1.0 - 1e-4 * alpha) * f_norm || cand_norm <= kResidualTol) {
          x = cand;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        return std::nullopt;
      }
    }
  } catch (const DomainError&) {
  }
  return std::nullopt;
}

Stability classify(const std::vector<std::complex<double>>& eigenvalues, double threshold) {
  bool any_pos = false;
  bool any_neg = false;
  bool any_zero = false;
  for (const auto& ev : eigenvalues) {
    if (ev.real() < -threshold) {
      any_neg = true;
    } else if (ev.real() > threshold) {
      any_pos = true;
    } else {
      any_zero = true;
    }
  }
  if (any_pos) {
    return any_neg ? Stability::Saddle : Stability::Unstable;
  }
  return any_zero ? Stability::Undetermined : Stability::Stable;
}

EquilibriumCatalog find_equilibria(const Model& m, const EquilibriumOptions& opts) {
  if (opts.starts < 1) {
    throw std::invalid_argument("find_equilibria: need at least one start");
  }
  EquilibriumCatalog catalog;
  catalog.horizon = opts.horizon > 0.0 ? opts.horizon : default_horizon(m);
  catalog.starts = static_cast<std::size_t>(opts.starts);

  const std::size_t r = m.r();
  const Philox4x32 base(opts.seed, 0x6571);
  struct StartResult {
    std::optional<Vector> from_flow;
    std::optional<Vector> from_start;
    Vector endpoint;
  };
  std::vector<StartResult> results(catalog.starts);
  parallel_for(
      catalog.starts,
      [&](std::size_t i) {
        Philox4x32 rng = base.split(i);
        const Vector start = i == 0 ? Vector(Vector::Constant(static_cast<Eigen::Index>(r), 1.0 / r))
                                    : random_simplex_point(r, rng);
        results[i].endpoint = integrate_endpoint(m, start, catalog.horizon, opts.dt);
        results[i].from_flow = newton_equilibrium(m, results[i].endpoint);
        results[i].from_start = newton_equilibrium(m, start);
      },
      static_cast<std::size_t>(std::max(0, opts.threads)));

  std::vector<Vector> roots;
  auto add_root = [&](const Vector& x) {
    for (const auto& y : roots) {
      if (l1_distance(x, y) <= opts.merge_tol) {
        return;
      }
    }
    roots.push_back(x);
  };
  std::vector<Vector> unresolved;
  for (const auto& res : results) {
    if (res.from_flow) {
      add_root(*res.from_flow);
    } else {
      bool seen = false;
      for (const auto& u : unresolved) {
        seen = seen || l1_distance(u, res.endpoint) <= 1e-3;
      }
      if (!seen) {
        unresolved.push_back(res.endpoint);
      }
    }
    if (res.from_start) {
      add_root(*res.from_start);
    }
  }
  catalog.unresolved = unresolved.size();

  for (const auto& x : roots) {
    Equilibrium eq;
    eq.point = SimplexPoint(x);
    eq.residual = drift(m, x).cwiseAbs().maxCoeff();
    const Matrix j = tangent_jacobian(m, x);
    if (j.size() > 0) {
      Eigen::EigenSolver<Matrix> solver(j, false);
      for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
        eq.eigenvalues.push_back(solver.eigenvalues()[k]);
      }
    }
    eq.stability = classify(eq.eigenvalues);
    catalog.equilibria.push_back(std::move(eq));
  }
  std::sort(catalog.equilibria.begin(), catalog.equilibria.end(), [](const Equilibrium& a, const Equilibrium& b) {
    const bool sa = a.stability == Stability::Stable;
    const bool sb = b.stability == Stability::Stable;
    if (sa != sb) {
      return sa;
    }
    const auto& wa = a.point.weights();
    const auto& wb = b.point.weights();
    return std::lexicographical_compare(wa.begin(), wa.end(), wb.begin(), wb.end(), std::greater<>());
  });
  return catalog;
}

OmegaLimitReport omega_limit_check(const Model& m, const EquilibriumCatalog& catalog, int resolution,
                                   double tolerance) {
  if (resolution <= 0) {
    resolution = m.r() <= 3 ? 10 : (m.r() <= 5 ? 5 : 3);
  }
  const auto grid = simplex_grid(m.r(), resolution);
  const double horizon = catalog.horizon > 0.0 ? catalog.horizon : default_horizon(m);
  std::vector<Vector> endpoints(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { endpoints[i] = integrate_endpoint(m, grid[i].weights(), horizon, 0.01); });

  OmegaLimitReport report;
  report.starts = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& eq : catalog.equilibria) {
      d = std::min(d, l1_distance(eq.point.weights(), endpoints[i]));
    }
    if (d > report.max_endpoint_distance) {
      report.max_endpoint_distance = d;
      report.max_endpoint_speed = drift_norm(m, endpoints[i]);
    }
    if (d > tolerance) {
      report.flagged = true;
      report.offending_starts.push_back(grid[i]);
      report.offending_endpoints.push_back(endpoints[i]);
    }
  }
  return report;
}

double relaxation_time(const EquilibriumCatalog& catalog, const Vector& mu) {
  double best_d = std::numeric_limits<double>::infinity();
  const Equilibrium* best = nullptr;
  for (const auto& eq : catalog.equilibria) {
    if (eq.stability != Stability::Stable) {
      continue;
    }
    const double d = l1_distance(eq.point.weights(), mu);
    if (d < best_d) {
      best_d = d;
      best = &eq;
    }
  }
  if (best == nullptr) {
    throw NumericalError("no stable equilibrium to measure relaxation against");
  }
  double slowest = -std::numeric_limits<double>::infinity();
  for (const auto& ev : best->eigenvalues) {
    slowest = std::max(slowest, ev.real());
  }
  if (best->eigenvalues.empty() || !(slowest < 0.0)) {
    throw NumericalError("stable equilibrium without a spectral gap");
  }
  return -1.0 / slowest;
}

}  // namespace mfldp
