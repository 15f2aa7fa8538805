#include "mfldp/builtin_models.hpp"

#include "mfldp/errors.hpp"
#include "format.hpp"

#include <cmath>

namespace mfldp {

namespace {

Model two_state(std::string name, std::string_view rate01, std::string_view rate10) {
  return Model(std::move(name), EdgeSet(2, {{0, 1}, {1, 0}}),
               {RateExpr::parse(rate01), RateExpr::parse(rate10)});
}

}  // namespace

Model csma_model(int r, const CsmaParams& params) {
  if (r < 2) {
    throw ValidationError("csma model needs r >= 2");
  }
  std::vector<double> a = params.attempt;
  if (a.empty()) {
    for (int i = 0; i < r; ++i) {
      a.push_back(std::ldexp(1.0, -i));
    }
  }
  if (a.size() != static_cast<std::size_t>(r)) {
    throw ValidationError("csma model: " + std::to_string(a.size()) + " attempt rates for " + std::to_string(r) +
                          " stages");
  }
  for (double v : a) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("csma model: attempt rates must be positive and finite");
    }
  }
  if (!(params.gamma > 0.0) || !(params.kappa > 0.0)) {
    throw ValidationError("csma model: gamma and kappa must be positive");
  }
  if (!(params.floor >= 0.0) || !std::isfinite(params.floor)) {
    throw ValidationError("csma model: floor must be nonnegative and finite");
  }

  using detail::format_double;
  std::string load;
  for (int k = 0; k < r; ++k) {
    load += (k ? " + " : "") + format_double(a[static_cast<std::size_t>(k)]) + "*mu[" + std::to_string(k) + "]";
  }
  const std::string decay = "exp(-((" + format_double(params.gamma) + "*(" + load + "))^" + format_double(params.kappa) + "))";
  const std::string lift = params.floor > 0.0 ? format_double(params.floor) + " + " : std::string();
  const std::string pc = "(" + lift + "1 - " + decay + ")";
  const std::string ps = params.floor > 0.0 ? "(" + lift + decay + ")" : decay;

  std::vector<Edge> edges;
  std::vector<RateExpr> rates;
  for (int i = 0; i < r; ++i) {
    const std::string ai = format_double(a[static_cast<std::size_t>(i)]);
    if (i + 1 < r) {
      edges.push_back({i, i + 1});
      rates.push_back(RateExpr::parse(ai + "*" + pc));
      if (i >= 1) {
        edges.push_back({i, 0});
        rates.push_back(RateExpr::parse(ai + "*" + ps));
      }
    } else {
      // Last stage: collision wraps to 0 and success resets to 0, so the two merge.
      edges.push_back({i, 0});
      rates.push_back(RateExpr::parse(ai));
    }
  }
  return Model("csma", EdgeSet(static_cast<std::size_t>(r), std::move(edges)), std::move(rates));
}

CsmaParams csma_bistable_params() { return CsmaParams{{1.0, 4.0, 4.0}, 0.62, 6.0, 0.05}; }

Model const2_model() { return two_state("const2", "1.0", "2.0"); }

Model sis_bistable_model() { return two_state("sis-bistable", "0.1+2*mu[1]*mu[1]", "0.1+2*mu[0]*mu[0]"); }

Model rotation3_model() {
  return Model("rotation3", EdgeSet(3, {{0, 1}, {1, 2}, {2, 0}}),
               {RateExpr::parse("0.1+mu[1]^2"), RateExpr::parse("0.1+mu[2]^2"), RateExpr::parse("0.1+mu[0]^2")});
}

std::vector<std::string> builtin_model_names() {
  return {"const2", "sis-bistable", "csma", "csma-bistable", "rotation3"};
}

bool is_builtin_model(std::string_view name) {
  for (const auto& n : builtin_model_names()) {
    if (n == name) {
      return true;
    }
  }
  return false;
}

Model builtin_model(std::string_view name) {
  if (name == "const2") {
    return const2_model();
  }
  if (name == "sis-bistable") {
    return sis_bistable_model();
  }
  if (name == "csma") {
    return csma_model(3);
  }
  if (name == "csma-bistable") {
    Model m = csma_model(3, csma_bistable_params());
    return Model("csma-bistable", m.edges(), m.rates());
  }
  if (name == "rotation3") {
    return rotation3_model();
  }
  throw ValidationError("unknown built-in model '" + std::string(name) + "'");
}

}  // namespace mfldp
