#pragma once

#include "mfldp/model.hpp"

#include <json.hpp>

#include <string>

namespace mfldp {

/// Model file schema:
///
///     {"name": "toy", "states": 2,
///      "edges": [{"from": 0, "to": 1, "rate": "1.0 + mu[1]"},
///                {"from": 1, "to": 0, "rate": "2.0"}]}
///
/// or a reference to a built-in model, optionally parameterized:
///
///     {"builtin": "csma", "r": 4, "attempt": [1, 0.5, 0.25, 0.125], "gamma": 1, "kappa": 1}
[[nodiscard]] Model model_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json model_to_json(const Model& m);

/// A built-in name or a path to a JSON model file.
[[nodiscard]] Model load_model(const std::string& ref);

}  // namespace mfldp
