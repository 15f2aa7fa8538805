#pragma once

#include "mfldp/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mfldp {

/// Parameters of the continuous-time CSMA backoff family.
///
/// A particle in backoff stage i attempts at rate attempt[i]. With aggregate attempt
/// mass G = sum_k attempt[k] mu[k], an attempt collides with probability
/// p_c(G) = 1 - exp(-(gamma G)^kappa). A collision moves the particle to stage
/// i+1 (wrapping from the last stage to 0), a success resets it to stage 0.
/// Success from stage 0 is a null transition and is omitted. A positive floor adds
/// floor * attempt[i] to both outcomes, keeping every rate bounded away from 0.
struct CsmaParams {
  std::vector<double> attempt;  // empty: attempt[i] = 2^-i
  double gamma = 1.0;
  double kappa = 1.0;
  double floor = 0.0;
};

[[nodiscard]] Model csma_model(int r, const CsmaParams& params = {});

/// Fixture in the bistable regime: r = 3, attempt = (1, 4, 4), gamma = 0.62, kappa = 6,
/// floor = 0.05.
[[nodiscard]] CsmaParams csma_bistable_params();

/// Two states, lambda01 = 1, lambda10 = 2.
[[nodiscard]] Model const2_model();

/// Two states with quadratic feedback: lambda01 = 0.1 + 2 mu1^2, lambda10 = 0.1 + 2 mu0^2.
[[nodiscard]] Model sis_bistable_model();

/// Three-state cycle 0 -> 1 -> 2 -> 0 with lambda_{i,i+1} = 0.1 + mu_{i+1}^2. Its
/// McKean-Vlasov flow has an attracting limit cycle around an unstable centre.
[[nodiscard]] Model rotation3_model();

/// const2, sis-bistable, csma, csma-bistable, rotation3.
[[nodiscard]] std::vector<std::string> builtin_model_names();
[[nodiscard]] bool is_builtin_model(std::string_view name);
[[nodiscard]] Model builtin_model(std::string_view name);

}  // namespace mfldp
