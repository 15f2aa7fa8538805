#pragma once

#include "mfldp/rate_expr.hpp"
#include "mfldp/simplex.hpp"

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfldp {

struct Edge {
  int from = 0;
  int to = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Admissible transitions of an r-state model. Self-loops, duplicates and
/// out-of-range endpoints are rejected with ValidationError.
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(std::size_t r, std::vector<Edge> edges);

  [[nodiscard]] std::size_t r() const noexcept { return r_; }
  [[nodiscard]] std::size_t size() const noexcept { return edges_.size(); }
  [[nodiscard]] bool empty() const noexcept { return edges_.empty(); }
  [[nodiscard]] const Edge& operator[](std::size_t e) const { return edges_[e]; }
  [[nodiscard]] auto begin() const noexcept { return edges_.begin(); }
  [[nodiscard]] auto end() const noexcept { return edges_.end(); }

  [[nodiscard]] std::optional<std::size_t> index_of(int from, int to) const;
  [[nodiscard]] bool contains(int from, int to) const { return index_of(from, to).has_value(); }

  /// Indices of edges leaving / entering state i.
  [[nodiscard]] std::span<const std::size_t> out_edges(int i) const;
  [[nodiscard]] std::span<const std::size_t> in_edges(int i) const;

  /// Strong connectivity of the directed graph (Z, E).
  [[nodiscard]] bool irreducible() const noexcept { return irreducible_; }

 private:
  std::size_t r_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
  bool irreducible_ = false;
};

/// Tarjan strongly-connected components; returns the component id of every vertex.
[[nodiscard]] std::vector<int> strongly_connected_components(std::size_t r, std::span<const Edge> edges);

class Model {
 public:
  Model() = default;
  /// rates[e] is the rate expression of edges[e]. Throws ValidationError when the
  /// counts differ or an expression references mu[k] with k >= r.
  Model(std::string name, EdgeSet edges, std::vector<RateExpr> rates);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] std::size_t r() const noexcept { return edges_.r(); }
  [[nodiscard]] const EdgeSet& edges() const noexcept { return edges_; }
  [[nodiscard]] const RateExpr& rate(std::size_t e) const { return rates_[e]; }
  [[nodiscard]] const std::vector<RateExpr>& rates() const noexcept { return rates_; }
  [[nodiscard]] bool constant_rates() const noexcept { return constant_; }

  /// lambda_e(mu) for every edge, written into out (size |E|).
  void edge_rates(std::span<const double> mu, std::span<double> out) const;
  [[nodiscard]] Vector edge_rates(const Vector& mu) const;

 private:
  std::string name_;
  EdgeSet edges_;
  std::vector<RateExpr> rates_;
  bool constant_ = true;
};

using RateMatrix = Matrix;

/// A_xi: lambda on edges, zero elsewhere off the diagonal, diagonal the negated row sum.
[[nodiscard]] RateMatrix rate_matrix(const Model& m, const SimplexPoint& xi);
[[nodiscard]] RateMatrix rate_matrix(const Model& m, const Vector& xi);

/// Net flow of the edge flux f_e into each state: sum_in f - sum_out f.
[[nodiscard]] Vector net_flow(const EdgeSet& edges, const Vector& flux);

/// McKean-Vlasov drift A*_mu mu.
[[nodiscard]] Vector drift(const Model& m, const Vector& mu);

struct ValidationReport {
  int resolution = 0;
  std::size_t grid_points = 0;
  bool irreducible = false;
  double c_hat = 0.0;
  double C_hat = 0.0;
  double lipschitz = 0.0;
  bool a1 = false;  // irreducible edge set
  bool a2 = false;  // finite Lipschitz estimate
  bool a3 = false;  // 0 < c_hat <= C_hat < inf
  std::vector<std::string> notes;

  [[nodiscard]] bool passed() const noexcept { return a1 && a2 && a3; }
};

/// 50 points per edge for r <= 4, 20 otherwise.
[[nodiscard]] int default_grid_resolution(std::size_t r);

/// Grid checks of the model assumptions. resolution <= 0 selects the default.
/// A rate that cannot be evaluated at a grid point raises ValidationError.
[[nodiscard]] ValidationReport validate_model(const Model& m, int resolution = 0);

}  // namespace mfldp
