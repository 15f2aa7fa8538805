#pragma once

namespace mfldp {

/// tau(u) = e^u - u - 1.
[[nodiscard]] double tau(double u) noexcept;

/// Legendre conjugate of tau: (u + 1) log(u + 1) - u for u > -1, 1 at u = -1 and
/// +infinity below.
[[nodiscard]] double tau_star(double u) noexcept;

/// tau*(e^x - 1) = x e^x - e^x + 1, the per-edge cost at log-tilt x.
[[nodiscard]] double tau_star_of_tilt(double x) noexcept;

}  // namespace mfldp
