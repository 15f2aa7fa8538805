#include "mfldp/model_io.hpp"

#include "mfldp/builtin_models.hpp"
#include "mfldp/errors.hpp"

#include <fstream>

namespace mfldp {

using nlohmann::json;

Model model_from_json(const json& j) {
  try {
    if (j.contains("builtin")) {
      const auto name = j.at("builtin").get<std::string>();
      if (name == "csma" || name == "csma-bistable") {
        CsmaParams params = name == "csma" ? CsmaParams{} : csma_bistable_params();
        const int r = j.value("r", 3);
        params.attempt = j.value("attempt", params.attempt);
        params.gamma = j.value("gamma", params.gamma);
        params.kappa = j.value("kappa", params.kappa);
        params.floor = j.value("floor", params.floor);
        Model m = csma_model(r, params);
        return Model(name, m.edges(), m.rates());
      }
      return builtin_model(name);
    }
    const auto r = j.at("states").get<std::size_t>();
    std::vector<Edge> edges;
    std::vector<RateExpr> rates;
    for (const auto& e : j.at("edges")) {
      edges.push_back({e.at("from").get<int>(), e.at("to").get<int>()});
      const auto& rate = e.at("rate");
      rates.push_back(rate.is_number() ? RateExpr::constant(rate.get<double>())
                                       : RateExpr::parse(rate.get<std::string>()));
    }
    return Model(j.value("name", std::string("model")), EdgeSet(r, std::move(edges)), std::move(rates));
  } catch (const json::exception& err) {
    throw ValidationError(std::string("malformed model description: ") + err.what());
  } catch (const ParseError& err) {
    throw ValidationError(std::string("bad rate expression: ") + err.what());
  }
}

json model_to_json(const Model& m) {
  json edges = json::array();
  for (std::size_t e = 0; e < m.edges().size(); ++e) {
    edges.push_back({{"from", m.edges()[e].from}, {"to", m.edges()[e].to}, {"rate", m.rate(e).print()}});
  }
  return {{"name", m.name()}, {"states", m.r()}, {"edges", edges}};
}

Model load_model(const std::string& ref) {
  if (is_builtin_model(ref)) {
    return builtin_model(ref);
  }
  std::ifstream in(ref);
  if (!in) {
    throw ValidationError("cannot open model file '" + ref + "'");
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ValidationError("model file '" + ref + "' is not valid JSON: " + err.what());
  }
  return model_from_json(j);
}

}  // namespace mfldp
