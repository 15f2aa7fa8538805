#include "mfldp/model.hpp"

#include "mfldp/errors.hpp"
#include "format.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace mfldp {

EdgeSet::EdgeSet(std::size_t r, std::vector<Edge> edges) : r_(r), edges_(std::move(edges)) {
  if (r == 0) {
    throw ValidationError("model needs at least one state");
  }
  out_.resize(r);
  in_.resize(r);
  std::set<Edge> seen;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    const auto n = static_cast<int>(r);
    if (edge.from < 0 || edge.from >= n || edge.to < 0 || edge.to >= n) {
      throw ValidationError("edge (" + std::to_string(edge.from) + "," + std::to_string(edge.to) +
                            ") out of range for " + std::to_string(r) + " states");
    }
    if (edge.from == edge.to) {
      throw ValidationError("self-loop on state " + std::to_string(edge.from));
    }
    if (!seen.insert(edge).second) {
      throw ValidationError("duplicate edge (" + std::to_string(edge.from) + "," + std::to_string(edge.to) + ")");
    }
    out_[static_cast<std::size_t>(edge.from)].push_back(e);
    in_[static_cast<std::size_t>(edge.to)].push_back(e);
  }
  const auto comp = strongly_connected_components(r, edges_);
  irreducible_ = std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp[0]; });
}

std::optional<std::size_t> EdgeSet::index_of(int from, int to) const {
  if (from < 0 || static_cast<std::size_t>(from) >= r_) {
    return std::nullopt;
  }
  for (std::size_t e : out_[static_cast<std::size_t>(from)]) {
    if (edges_[e].to == to) {
      return e;
    }
  }
  return std::nullopt;
}

std::span<const std::size_t> EdgeSet::out_edges(int i) const { return out_.at(static_cast<std::size_t>(i)); }

std::span<const std::size_t> EdgeSet::in_edges(int i) const { return in_.at(static_cast<std::size_t>(i)); }

std::vector<int> strongly_connected_components(std::size_t r, std::span<const Edge> edges) {
  std::vector<std::vector<int>> adj(r);
  for (const Edge& e : edges) {
    adj[static_cast<std::size_t>(e.from)].push_back(e.to);
  }
  std::vector<int> index(r, -1);
  std::vector<int> low(r, 0);
  std::vector<int> comp(r, -1);
  std::vector<bool> on_stack(r, false);
  std::vector<int> stack;
  int counter = 0;
  int components = 0;
  std::function<void(int)> visit = [&](int v) {
    const auto uv = static_cast<std::size_t>(v);
    index[uv] = low[uv] = counter++;
    stack.push_back(v);
    on_stack[uv] = true;
    for (int w : adj[uv]) {
      const auto uw = static_cast<std::size_t>(w);
      if (index[uw] < 0) {
        visit(w);
        low[uv] = std::min(low[uv], low[uw]);
      } else if (on_stack[uw]) {
        low[uv] = std::min(low[uv], index[uw]);
      }
    }
    if (low[uv] == index[uv]) {
      int w = -1;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[static_cast<std::size_t>(w)] = false;
        comp[static_cast<std::size_t>(w)] = components;
      } while (w != v);
      ++components;
    }
  };
  for (std::size_t v = 0; v < r; ++v) {
    if (index[v] < 0) {
      visit(static_cast<int>(v));
    }
  }
  return comp;
}

Model::Model(std::string name, EdgeSet edges, std::vector<RateExpr> rates)
    : name_(std::move(name)), edges_(std::move(edges)), rates_(std::move(rates)) {
  if (rates_.size() != edges_.size()) {
    throw ValidationError("model '" + name_ + "': " + std::to_string(edges_.size()) + " edges but " +
                          std::to_string(rates_.size()) + " rate expressions");
  }
  for (std::size_t e = 0; e < rates_.size(); ++e) {
    const int k = rates_[e].max_variable_index();
    if (k >= static_cast<int>(edges_.r())) {
      throw ValidationError("rate of edge (" + std::to_string(edges_[e].from) + "," + std::to_string(edges_[e].to) +
                            ") references mu[" + std::to_string(k) + "] but the model has " +
                            std::to_string(edges_.r()) + " states");
    }
    constant_ = constant_ && rates_[e].is_constant();
  }
}

void Model::edge_rates(std::span<const double> mu, std::span<double> out) const {
  for (std::size_t e = 0; e < rates_.size(); ++e) {
    out[e] = rates_[e].evaluate(mu);
  }
}

Vector Model::edge_rates(const Vector& mu) const {
  Vector out(static_cast<Eigen::Index>(rates_.size()));
  edge_rates({mu.data(), static_cast<std::size_t>(mu.size())}, {out.data(), rates_.size()});
  return out;
}

RateMatrix rate_matrix(const Model& m, const SimplexPoint& xi) { return rate_matrix(m, xi.weights()); }

RateMatrix rate_matrix(const Model& m, const Vector& xi) {
  const auto r = static_cast<Eigen::Index>(m.r());
  RateMatrix a = RateMatrix::Zero(r, r);
  const Vector lambda = m.edge_rates(xi);
  for (std::size_t e = 0; e < m.edges().size(); ++e) {
    const Edge& edge = m.edges()[e];
    a(edge.from, edge.to) = lambda[static_cast<Eigen::Index>(e)];
  }
  for (Eigen::Index i = 0; i < r; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < r; ++j) {
      if (j != i) {
        off += a(i, j);
      }
    }
    a(i, i) = -off;
  }
  return a;
}

Vector net_flow(const EdgeSet& edges, const Vector& flux) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(edges.r()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double f = flux[static_cast<Eigen::Index>(e)];
    out[edges[e].from] -= f;
    out[edges[e].to] += f;
  }
  return out;
}

Vector drift(const Model& m, const Vector& mu) {
  Vector flux = m.edge_rates(mu);
  for (std::size_t e = 0; e < m.edges().size(); ++e) {
    flux[static_cast<Eigen::Index>(e)] *= mu[m.edges()[e].from];
  }
  return net_flow(m.edges(), flux);
}

int default_grid_resolution(std::size_t r) { return r <= 4 ? 50 : 20; }

ValidationReport validate_model(const Model& m, int resolution) {
  if (m.edges().empty()) {
    throw ValidationError("model '" + m.name() + "' has no edges");
  }
  ValidationReport report;
  report.resolution = resolution > 0 ? resolution : default_grid_resolution(m.r());
  report.irreducible = m.edges().irreducible();
  report.a1 = report.irreducible;
  if (!report.a1) {
    report.notes.emplace_back("edge set is not strongly connected");
  }

  const std::size_t r = m.r();
  const std::size_t ne = m.edges().size();
  const auto grid = compositions(r, report.resolution);
  report.grid_points = grid.size();

  std::vector<double> mu(r);
  std::vector<double> nb(r);
  std::vector<double> lam(ne);
  std::vector<double> lam_nb(ne);
  const double step = 1.0 / report.resolution;
  const double nb_dist = 2.0 * step;

  auto evaluate = [&](const std::vector<double>& point, std::vector<double>& out) {
    try {
      m.edge_rates(point, out);
    } catch (const DomainError& err) {
      std::string where = "(";
      for (std::size_t k = 0; k < point.size(); ++k) {
        where += (k ? ", " : "") + detail::format_double(point[k]);
      }
      throw ValidationError("rate evaluation failed at mu = " + where + "): " + err.what());
    }
  };

  double c_hat = std::numeric_limits<double>::infinity();
  double C_hat = -std::numeric_limits<double>::infinity();
  double lip = 0.0;
  for (const auto& counts : grid) {
    for (std::size_t k = 0; k < r; ++k) {
      mu[k] = counts[k] * step;
    }
    evaluate(mu, lam);
    for (double v : lam) {
      c_hat = std::min(c_hat, v);
      C_hat = std::max(C_hat, v);
    }
    // Lipschitz by finite differences to grid neighbours that move one unit of mass i -> j.
    for (std::size_t i = 0; i < r; ++i) {
      if (counts[i] == 0) {
        continue;
      }
      for (std::size_t j = 0; j < r; ++j) {
        if (j == i) {
          continue;
        }
        nb = mu;
        nb[i] = (counts[i] - 1) * step;
        nb[j] = (counts[j] + 1) * step;
        evaluate(nb, lam_nb);
        for (std::size_t e = 0; e < ne; ++e) {
          lip = std::max(lip, std::abs(lam_nb[e] - lam[e]) / nb_dist);
        }
      }
    }
  }
  report.c_hat = c_hat;
  report.C_hat = C_hat;
  report.lipschitz = lip;
  report.a2 = std::isfinite(lip);
  report.a3 = c_hat > 0.0 && std::isfinite(C_hat);
  if (!report.a3) {
    report.notes.emplace_back("rates not bounded away from zero on the grid (c_hat = " +
                              detail::format_double(c_hat) + ")");
  }
  report.notes.emplace_back("bounds are grid extrema at resolution " + std::to_string(report.resolution) +
                            "; they are not certified between grid points");
  return report;
}

}  // namespace mfldp
