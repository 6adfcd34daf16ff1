#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "owl/estimate.hpp"
#include "owl/increments.hpp"
#include "owl/log_signed.hpp"
#include "owl/paths.hpp"
#include "owl/rng.hpp"

namespace owl {

/// Δ(x) = ∏_{i<j} (x_j - x_i) in signed log space; one for d = 1.
LogSignedValue vandermonde(std::span<const double> x);

/// ∏_{i<j} (x_j - x_i + η_j - η_i), the integrand of the superharmonic bound h.
LogSignedValue shifted_vandermonde(std::span<const double> x, std::span<const double> eta);

/// η_1 = 0, η_j = ζ_1 + ... + ζ_{j-1} with i.i.d. ζ. Draws from `stream`.
std::vector<double> sample_eta(const IncrementLaw& law, int d, RngStream& stream);

// All estimators below draw replica r from root.replica(r): walker j on lane j,
// ζ draws on lanes::kZeta. Results are deterministic in (root, n).

/// Mean of Δ(S(t)) for the free walk (no killing); equals Δ(x) by harmonicity.
MCEstimate estimate_free_vandermonde(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                                     const RngStream& root);

/// Mean of Δ(S(t)) 1{τ > t} (horizon t), which tends to V(x) as t grows; requires n >= 100.
MCEstimate estimate_V_survival(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                               const RngStream& root);

/// Δ(x) - mean of Δ(S(τ)) 1{τ <= horizon}.
MCEstimate estimate_V_stopped(const WeylPoint& x, double horizon, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root);

/// Mean of ∏ (x_j - x_i + η_j - η_i); every sample is >= Δ(x).
MCEstimate estimate_h(const WeylPoint& x, const IncrementLaw& law, std::uint64_t n, const RngStream& root);

/// h(x) - E_x[h(S(t)); τ > t], one η draw per replica shared by both terms.
MCEstimate superharmonic_deficit(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                                 const RngStream& root);

/// Throws PreconditionError naming the first spacing at or below t^(1/2 - eps).
void require_in_W_eps(const WeylPoint& x, double t_scale, double eps);

/// E_x[Δ(S(t)); τ > t] / Δ(x) for x in W_{t,eps}.
MCEstimate ratio_V_over_delta(const WeylPoint& x, double t, double eps, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root);

/// Δ(x) / ĥ(x) for x in W_{t_scale,eps}, with delta-method SE.
MCEstimate ratio_delta_over_h(const WeylPoint& x, double t_scale, double eps, const IncrementLaw& law,
                              std::uint64_t n, const RngStream& root);

/// (mean |Δ(S(t))|^p)^(1/p) / (Δ(x) t^(d^2)) for adjacent spacings >= 1.
MCEstimate moment_bound_probe(const WeylPoint& x, double t, double p, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root);

/// Evenly spaced Weyl point 0, s, 2s, ...
WeylPoint spaced_point(int d, double spacing);

}  // namespace owl
