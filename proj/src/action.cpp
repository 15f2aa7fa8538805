#include "mfldp/action.hpp"

#include "mfldp/errors.hpp"
#include "mfldp/legendre.hpp"
#include "format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mfldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxStructuralStates = 20;

std::string state_set(unsigned mask, std::size_t r) {
  std::string out = "{";
  bool first = true;
  for (std::size_t k = 0; k < r; ++k) {
    if (mask & (1u << k)) {
      out += (first ? "" : ",") + std::to_string(k);
      first = false;
    }
  }
  return out + "}";
}

// A set U that no positive-mass edge enters cannot gain mass.
std::optional<std::string> structural_obstruction(const EdgeSet& edges, const Vector& xi, const Vector& lambda,
                                                  const Vector& velocity) {
  const std::size_t r = edges.r();
  if (xi.minCoeff() > 0.0 || r > kMaxStructuralStates) {
    return std::nullopt;
  }
  const double tol = 1e-12 * std::max(1.0, velocity.cwiseAbs().maxCoeff());
  std::vector<std::pair<unsigned, unsigned>> active;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (xi[edges[e].from] > 0.0 && lambda[static_cast<Eigen::Index>(e)] > 0.0) {
      active.emplace_back(1u << edges[e].from, 1u << edges[e].to);
    }
  }
  const unsigned full = (1u << r) - 1;
  for (unsigned mask = 1; mask < full; ++mask) {
    bool enters = false;
    for (const auto& [from, to] : active) {
      if ((mask & to) && !(mask & from)) {
        enters = true;
        break;
      }
    }
    if (enters) {
      continue;
    }
    double gain = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      if (mask & (1u << k)) {
        gain += velocity[static_cast<Eigen::Index>(k)];
      }
    }
    if (gain > tol) {
      return "states " + state_set(mask, r) + " need net inflow " + detail::format_double(gain) +
             " but no edge from a state with positive mass enters them";
    }
  }
  return std::nullopt;
}

struct DualState {
  Vector tilt;   // phi_to - phi_from per edge
  Vector excess; // w (e^tilt - 1) per edge
  Vector grad;   // theta - net flow of excess, all r states
  double value = 0.0;
};

DualState evaluate_dual(const EdgeSet& edges, const Vector& w, const Vector& theta, const Vector& phi) {
  DualState s;
  const auto E = static_cast<Eigen::Index>(edges.size());
  s.tilt.resize(E);
  s.excess.resize(E);
  s.grad = theta;
  s.value = theta.dot(phi);
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto& edge = edges[static_cast<std::size_t>(e)];
    const double x = phi[edge.to] - phi[edge.from];
    s.tilt[e] = x;
    s.excess[e] = w[e] * std::expm1(x);
    s.grad[edge.to] -= s.excess[e];
    s.grad[edge.from] += s.excess[e];
    s.value -= w[e] * tau(x);
  }
  if (!std::isfinite(s.value)) {
    s.value = -kInf;
  }
  return s;
}

SliceSolution infeasible(SliceSolution sol, std::string why) {
  sol.feasible = false;
  sol.cost = kInf;
  sol.dual = kInf;
  sol.duality_gap = 0.0;
  sol.diagnosis = std::move(why);
  return sol;
}

// Newton ascent on the dual with phi[0] = 0. theta is the target net flow of the
// rate excess w (e^tilt - 1).
SliceSolution newton_slice(const EdgeSet& edges, const Vector& xi, const Vector& floored, const Vector& lambda,
                           const Vector& w, const Vector& theta, const SliceOptions& opts) {
  const auto r = static_cast<Eigen::Index>(edges.r());
  const auto E = static_cast<Eigen::Index>(edges.size());
  SliceSolution sol;
  sol.base_rates = lambda;
  Vector phi = Vector::Zero(r);
  const double tol = opts.tolerance * std::max(1.0, theta.cwiseAbs().maxCoeff());
  DualState s = evaluate_dual(edges, w, theta, phi);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (s.grad.tail(r - 1).cwiseAbs().maxCoeff() <= tol) {
      break;
    }
    Matrix H = Matrix::Zero(r, r);
    for (Eigen::Index e = 0; e < E; ++e) {
      const auto& edge = edges[static_cast<std::size_t>(e)];
      const double f = w[e] + s.excess[e];
      H(edge.from, edge.from) += f;
      H(edge.to, edge.to) += f;
      H(edge.from, edge.to) -= f;
      H(edge.to, edge.from) -= f;
    }
    const Vector g = s.grad.tail(r - 1);
    Vector d = H.bottomRightCorner(r - 1, r - 1).ldlt().solve(g);
    if (!d.allFinite()) {
      d = g;
    }
    const double slope = g.dot(d);
    if (slope <= 1e-20 * std::max(1.0, std::abs(s.value))) {
      break;
    }
    Vector next = phi;
    double alpha = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      next.tail(r - 1) = phi.tail(r - 1) + alpha * d;
      DualState cand = evaluate_dual(edges, w, theta, next);
      if (cand.value >= s.value + 1e-4 * alpha * slope ||
          cand.grad.tail(r - 1).cwiseAbs().maxCoeff() <= 0.5 * g.cwiseAbs().maxCoeff()) {
        phi = next;
        s = std::move(cand);
        moved = true;
        break;
      }
    }
    if (!moved) {
      break;
    }
    if (phi.cwiseAbs().maxCoeff() > opts.phi_cap) {
      sol.phi = phi;
      sol.iterations = it + 1;
      return infeasible(std::move(sol), "dual potentials exceeded the cap " + detail::format_double(opts.phi_cap) +
                                            "; the velocity needs flow that the edges cannot carry");
    }
  }
  sol.iterations = it;
  sol.phi = phi;
  sol.residual = s.grad.cwiseAbs().maxCoeff();
  sol.rates.resize(E);
  sol.cost = 0.0;
  sol.flux = 0.0;
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto& edge = edges[static_cast<std::size_t>(e)];
    sol.rates[e] = lambda[e] * std::exp(s.tilt[e]);
    const double c = w[e] * tau_star_of_tilt(s.tilt[e]);
    sol.cost += c;
    sol.flux += floored[edge.from] * sol.rates[e];
    if (xi[edge.from] < floored[edge.from]) {
      sol.floor_cost += c;
    }
  }
  sol.dual = s.value;
  sol.duality_gap = sol.cost - sol.dual;
  if (!std::isfinite(sol.cost) || sol.residual > 1e-6 * std::max(1.0, theta.cwiseAbs().maxCoeff())) {
    return infeasible(std::move(sol), "dual ascent stalled with flow residual " + detail::format_double(sol.residual));
  }
  return sol;
}

void check_slice_inputs(const EdgeSet& edges, const Vector& xi, const Vector& lambda, const Vector& vec) {
  const auto r = static_cast<Eigen::Index>(edges.r());
  if (xi.size() != r || vec.size() != r || lambda.size() != static_cast<Eigen::Index>(edges.size())) {
    throw std::invalid_argument("slice: dimension mismatch");
  }
  if (std::abs(vec.sum()) > 1e-12 * std::max(1.0, vec.cwiseAbs().sum())) {
    throw std::invalid_argument("slice: velocity components must sum to 0");
  }
}

Vector floored_mass(const Vector& xi, double floor) { return xi.cwiseMax(floor); }

Vector edge_weights(const EdgeSet& edges, const Vector& mass, const Vector& lambda) {
  Vector w(lambda.size());
  for (Eigen::Index e = 0; e < lambda.size(); ++e) {
    w[e] = mass[edges[static_cast<std::size_t>(e)].from] * lambda[e];
  }
  return w;
}

}  // namespace

SliceSolution solve_slice(const EdgeSet& edges, const Vector& xi, const Vector& lambda, const Vector& velocity,
                          const SliceOptions& opts) {
  check_slice_inputs(edges, xi, lambda, velocity);
  const Vector floored = floored_mass(xi, opts.floor);
  const Vector w = edge_weights(edges, floored, lambda);
  if (auto why = structural_obstruction(edges, xi, lambda, velocity)) {
    SliceSolution sol;
    sol.base_rates = lambda;
    sol.phi = Vector::Zero(xi.size());
    return infeasible(std::move(sol), *why);
  }
  const Vector theta = velocity - net_flow(edges, w);
  return newton_slice(edges, xi, floored, lambda, w, theta, opts);
}

SliceSolution slice_cost(const Model& m, const Vector& xi, const Vector& theta, const SliceOptions& opts) {
  const Vector lambda = m.edge_rates(xi);
  check_slice_inputs(m.edges(), xi, lambda, theta);
  const Vector floored = floored_mass(xi, opts.floor);
  const Vector w = edge_weights(m.edges(), floored, lambda);
  const Vector velocity = theta + net_flow(m.edges(), edge_weights(m.edges(), xi, lambda));
  if (auto why = structural_obstruction(m.edges(), xi, lambda, velocity)) {
    SliceSolution sol;
    sol.base_rates = lambda;
    sol.phi = Vector::Zero(xi.size());
    return infeasible(std::move(sol), *why);
  }
  return newton_slice(m.edges(), xi, floored, lambda, w, theta, opts);
}

SliceSolution slice_cost_for_velocity(const Model& m, const Vector& xi, const Vector& v, const SliceOptions& opts) {
  return solve_slice(m.edges(), xi, m.edge_rates(xi), v, opts);
}

PathGrid PathGrid::linear(const Vector& nu, const Vector& xi, int K, double T) {
  if (K < 1 || !(T > 0.0)) {
    throw std::invalid_argument("PathGrid::linear: need K >= 1 and T > 0");
  }
  PathGrid p;
  for (int k = 0; k <= K; ++k) {
    const double s = static_cast<double>(k) / K;
    p.times.push_back(s * T);
    p.points.push_back(k == K ? xi : Vector((1.0 - s) * nu + s * xi));
  }
  return p;
}

Vector PathGrid::at(double t) const {
  if (times.empty()) {
    throw std::logic_error("empty path");
  }
  if (t <= times.front()) {
    return points.front();
  }
  if (t >= times.back()) {
    return points.back();
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin()) - 1;
  const double s = (t - times[k]) / (times[k + 1] - times[k]);
  return (1.0 - s) * points[k] + s * points[k + 1];
}

void PathGrid::write_csv(std::ostream& out) const {
  out << "t";
  for (std::size_t k = 0; k < r(); ++k) {
    out << ",mu" << k;
  }
  out << "\n";
  for (std::size_t n = 0; n < times.size(); ++n) {
    out << detail::format_double(times[n]);
    for (Eigen::Index k = 0; k < points[n].size(); ++k) {
      out << "," << detail::format_double(points[n][k]);
    }
    out << "\n";
  }
}

PathGrid PathGrid::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("path csv: missing header");
  }
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (columns == 0 || line.rfind("t,", 0) != 0) {
    throw ValidationError("path csv: header must be t,mu0,...");
  }
  PathGrid p;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) {
          throw std::invalid_argument(cell);
        }
      } catch (const std::exception&) {
        throw ValidationError("path csv: bad number '" + cell + "' on row " + std::to_string(row));
      }
    }
    if (values.size() != columns + 1) {
      throw ValidationError("path csv: row " + std::to_string(row) + " has " + std::to_string(values.size()) +
                            " fields");
    }
    if (!p.times.empty() && !(values[0] > p.times.back())) {
      throw ValidationError("path csv: times must increase (row " + std::to_string(row) + ")");
    }
    p.times.push_back(values[0]);
    p.points.push_back(Eigen::Map<const Vector>(values.data() + 1, static_cast<Eigen::Index>(columns)));
  }
  if (p.times.size() < 2) {
    throw ValidationError("path csv: need at least two knots");
  }
  return p;
}

std::vector<std::pair<double, double>> segment_nodes(double dt, double max_substep) {
  if (!(max_substep > 0.0)) {
    return {{0.5, 1.0}};
  }
  const int n = dt > max_substep ? static_cast<int>(std::min(std::ceil(dt / max_substep), 1e6)) : 1;
  const double g = 0.5 / std::sqrt(3.0);
  std::vector<std::pair<double, double>> nodes;
  nodes.reserve(2 * static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    nodes.emplace_back((j + 0.5 - g) / n, 0.5 / n);
    nodes.emplace_back((j + 0.5 + g) / n, 0.5 / n);
  }
  return nodes;
}

PathCost path_cost(const Model& m, const PathGrid& path, const SliceOptions& opts, double max_substep) {
  if (path.times.size() != path.points.size() || path.times.size() < 2) {
    throw std::invalid_argument("path_cost: need at least two knots with matching times");
  }
  PathCost out;
  const std::size_t K = path.segments();
  out.segment_cost.resize(K);
  out.segment_rates.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    if (!(dt > 0.0)) {
      throw std::invalid_argument("path_cost: knot times must increase");
    }
    Vector v = (path.points[k + 1] - path.points[k]) / dt;
    v.array() -= v.mean();
    const auto nodes = segment_nodes(dt, max_substep);
    out.segment_cost[k] = 0.0;
    double nearest = 2.0;
    for (const auto& [a, w] : nodes) {
      const Vector mid = (1.0 - a) * path.points[k] + a * path.points[k + 1];
      const SliceSolution s = slice_cost_for_velocity(m, mid, v, opts);
      if (!s.feasible) {
        out.segment_cost[k] = kInf;
        out.cost = kInf;
        out.infeasible_segment = k;
        out.diagnosis = "segment " + std::to_string(k) + ": " + s.diagnosis;
        return out;
      }
      if (std::abs(a - 0.5) < nearest) {
        nearest = std::abs(a - 0.5);
        out.segment_rates[k] = s.rates;
      }
      out.segment_cost[k] += w * s.cost;
      out.cost += w * s.cost * dt;
      out.floor_cost += w * s.floor_cost * dt;
      out.flux += w * s.flux * dt;
    }
  }
  return out;
}

std::size_t ControlSchedule::segment_index(double t) const {
  if (segments.empty()) {
    throw std::logic_error("empty control schedule");
  }
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (t < segments[k].end) {
      return k;
    }
  }
  return segments.size() - 1;
}

Vector ControlSchedule::state_at(double t) const {
  const auto& seg = segments[segment_index(t)];
  const double s = std::clamp((t - seg.start) / (seg.end - seg.start), 0.0, 1.0);
  return (1.0 - s) * seg.from + s * seg.to;
}

Vector ControlSchedule::rates_at(double t) const {
  const auto& seg = segments[segment_index(t)];
  if (!seg.transport) {
    return seg.rates;
  }
  const Vector mu = state_at(t);
  const double duration = seg.end - seg.start;
  Vector l = Vector::Zero(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double f = seg.flow[static_cast<Eigen::Index>(e)];
    if (f > 0.0) {
      const double mass = mu[edges[e].from];
      l[static_cast<Eigen::Index>(e)] = mass > 0.0 ? f / (duration * mass) : kInf;
    }
  }
  return l;
}

Matrix ControlSchedule::rate_matrix_at(double t) const {
  const Vector l = rates_at(t);
  const auto r = static_cast<Eigen::Index>(edges.r());
  Matrix L = Matrix::Zero(r, r);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    L(edges[e].from, edges[e].to) = l[static_cast<Eigen::Index>(e)];
    L(edges[e].from, edges[e].from) -= l[static_cast<Eigen::Index>(e)];
  }
  return L;
}

double ControlSchedule::flux() const {
  double total = 0.0;
  for (const auto& seg : segments) {
    if (seg.transport) {
      total += seg.flow.sum();
    } else {
      const Vector mid = 0.5 * (seg.from + seg.to);
      for (std::size_t e = 0; e < edges.size(); ++e) {
        total += mid[edges[e].from] * seg.rates[static_cast<Eigen::Index>(e)] * (seg.end - seg.start);
      }
    }
  }
  return total;
}

void ControlSchedule::write_csv(std::ostream& out, int samples) const {
  out << "t,edge,rate\n";
  for (const auto& seg : segments) {
    for (int k = 0; k < samples; ++k) {
      const double t = seg.start + (k + 0.5) / samples * (seg.end - seg.start);
      const Vector l = rates_at(t);
      for (std::size_t e = 0; e < edges.size(); ++e) {
        out << detail::format_double(t) << "," << edges[e].from << "->" << edges[e].to << ","
            << detail::format_double(l[static_cast<Eigen::Index>(e)]) << "\n";
      }
    }
  }
}

double constant_velocity_bound(const Vector& nu, const Vector& xi, double T, double C, double c) {
  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  const auto r = static_cast<double>(nu.size());
  double entropy_terms = 0.0;
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double d = std::abs(nu[i] - xi[i]);
    entropy_terms += std::abs(xlogx(d)) + std::abs(xlogx(xi[i]) - xlogx(nu[i]));
    l1 += d;
  }
  const double K = 1.0 / std::numbers::e;
  return entropy_terms + l1 * (std::abs(std::log(T)) + std::abs(std::log(C)) + std::abs(std::log(c)) + K + 2.0) +
         C * T * r * r;
}

namespace {

std::vector<int> shortest_route(const EdgeSet& edges, int from, int to) {
  std::vector<int> parent(edges.r(), -2);
  std::deque<int> queue{from};
  parent[static_cast<std::size_t>(from)] = -1;
  while (!queue.empty()) {
    const int a = queue.front();
    queue.pop_front();
    if (a == to) {
      break;
    }
    for (std::size_t e : edges.out_edges(a)) {
      const int b = edges[e].to;
      if (parent[static_cast<std::size_t>(b)] == -2) {
        parent[static_cast<std::size_t>(b)] = a;
        queue.push_back(b);
      }
    }
  }
  if (parent[static_cast<std::size_t>(to)] == -2) {
    throw ValidationError("no path of admissible transitions from " + std::to_string(from) + " to " +
                          std::to_string(to));
  }
  std::vector<int> route{to};
  while (route.back() != from) {
    route.push_back(parent[static_cast<std::size_t>(route.back())]);
  }
  std::reverse(route.begin(), route.end());
  return route;
}

}  // namespace

Construction constant_velocity_controls(const Model& m, const Vector& nu, const Vector& xi, double T,
                                        std::optional<double> C, std::optional<double> c) {
  if (!(T > 0.0)) {
    throw std::invalid_argument("constant_velocity_controls: need T > 0");
  }
  const auto r = static_cast<Eigen::Index>(m.r());
  if (nu.size() != r || xi.size() != r) {
    throw std::invalid_argument("constant_velocity_controls: dimension mismatch");
  }
  Construction out;
  if (!C || !c) {
    const ValidationReport report = validate_model(m);
    out.C = C.value_or(report.C_hat);
    out.c = c.value_or(report.c_hat);
  } else {
    out.C = *C;
    out.c = *c;
  }
  const EdgeSet& edges = m.edges();
  const auto E = static_cast<Eigen::Index>(edges.size());
  out.controls.edges = edges;

  double deficit_total = 0.0;
  for (Eigen::Index j = 0; j < r; ++j) {
    deficit_total += std::max(0.0, xi[j] - nu[j]);
  }

  struct Move {
    int from;
    int to;
    double mass;
  };
  std::vector<Move> direct;
  std::vector<std::vector<Move>> routed;  // hops of each routed pair
  if (deficit_total > 0.0) {
    for (Eigen::Index i = 0; i < r; ++i) {
      const double excess = nu[i] - xi[i];
      if (!(excess > 0.0)) {
        continue;
      }
      for (Eigen::Index j = 0; j < r; ++j) {
        const double need = xi[j] - nu[j];
        if (!(need > 0.0)) {
          continue;
        }
        const double mass = excess * need / deficit_total;
        const int a = static_cast<int>(i);
        const int b = static_cast<int>(j);
        if (edges.contains(a, b)) {
          direct.push_back({a, b, mass});
        } else {
          const auto route = shortest_route(edges, a, b);
          std::vector<Move> hops;
          for (std::size_t h = 0; h + 1 < route.size(); ++h) {
            hops.push_back({route[h], route[h + 1], mass});
          }
          routed.push_back(std::move(hops));
        }
      }
    }
  }

  std::vector<std::vector<Move>> legs;
  if (!direct.empty()) {
    legs.push_back(direct);
  }
  for (const auto& hops : routed) {
    for (const auto& hop : hops) {
      legs.push_back({hop});
    }
  }
  if (legs.empty()) {
    legs.emplace_back();
  }

  const double leg_time = T / static_cast<double>(legs.size());
  Vector current = nu;
  out.waypoints.push_back(nu);
  for (std::size_t k = 0; k < legs.size(); ++k) {
    ControlSegment seg;
    seg.start = static_cast<double>(k) * leg_time;
    seg.end = k + 1 == legs.size() ? T : static_cast<double>(k + 1) * leg_time;
    seg.from = current;
    seg.flow = Vector::Zero(E);
    Vector next = current;
    for (const auto& mv : legs[k]) {
      seg.flow[static_cast<Eigen::Index>(*edges.index_of(mv.from, mv.to))] += mv.mass;
      next[mv.from] -= mv.mass;
      next[mv.to] += mv.mass;
    }
    if (k + 1 == legs.size()) {
      next = xi;
    }
    seg.to = next;
    out.leg_bounds.push_back(constant_velocity_bound(current, next, seg.end - seg.start, out.C, out.c));
    out.cost_bound += out.leg_bounds.back();
    out.controls.segments.push_back(std::move(seg));
    out.waypoints.push_back(next);
    current = next;
  }
  return out;
}

PathGrid realized_path(const ControlSchedule& controls, int knots_per_segment) {
  if (knots_per_segment < 1 || controls.segments.empty()) {
    throw std::invalid_argument("realized_path: need a nonempty schedule and at least one step per segment");
  }
  PathGrid p;
  p.times.push_back(controls.segments.front().start);
  p.points.push_back(controls.segments.front().from);
  for (const auto& seg : controls.segments) {
    for (int k = 1; k <= knots_per_segment; ++k) {
      const double s = static_cast<double>(k) / knots_per_segment;
      p.times.push_back(k == knots_per_segment ? seg.end : seg.start + s * (seg.end - seg.start));
      p.points.push_back(k == knots_per_segment ? seg.to : Vector((1.0 - s) * seg.from + s * seg.to));
    }
  }
  return p;
}

ControlSchedule slice_controls(const Model& m, const PathGrid& path, const SliceOptions& opts) {
  const PathCost pc = path_cost(m, path, opts);
  if (!pc.finite()) {
    throw NumericalError("slice_controls: " + pc.diagnosis);
  }
  ControlSchedule out;
  out.edges = m.edges();
  for (std::size_t k = 0; k < path.segments(); ++k) {
    ControlSegment seg;
    seg.start = path.times[k];
    seg.end = path.times[k + 1];
    seg.from = path.points[k];
    seg.to = path.points[k + 1];
    seg.transport = false;
    seg.rates = pc.segment_rates[k];
    out.segments.push_back(std::move(seg));
  }
  return out;
}

std::pair<PathGrid, ControlSchedule> rescale_path(const PathGrid& path, const ControlSchedule& controls, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("rescale_path: need 0 < alpha < inf");
  }
  const double t0 = path.times.empty() ? 0.0 : path.times.front();
  auto warp = [&](double t) { return alpha == 1.0 ? t : t0 + (t - t0) / alpha; };
  PathGrid p = path;
  for (auto& t : p.times) {
    t = warp(t);
  }
  ControlSchedule c = controls;
  for (auto& seg : c.segments) {
    seg.start = warp(seg.start);
    seg.end = warp(seg.end);
    if (!seg.transport) {
      seg.rates *= alpha;
    }
  }
  return {std::move(p), std::move(c)};
}

}  // namespace mfldp
