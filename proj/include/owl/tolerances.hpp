#pragma once

#include <cstdint>

/// Desk-scale acceptance tolerances. The constants in the underlying
/// inequalities are existential, so every threshold used by the suites is a
/// choice recorded here and nowhere else.
namespace owl::desk {

/// One-sided bands, in standard errors, for inequality checks (deficit >= -3 SE, V <= h + 3 SE).
inline constexpr double kInequalitySe = 3.0;
/// Two-sided band for agreement of two unbiased estimators of one quantity.
inline constexpr double kAgreementSe = 4.0;
/// Floor for V/Δ and Δ/h on W_{t,ε}.
inline constexpr double kRatioFloor = 0.9;
/// Spacing exponent 1/2 - ε with ε = 0.05 for the W_{t,ε} probes.
inline constexpr double kRegionEps = 0.05;

/// Grid-pair slack for likelihood-ratio checks.
inline constexpr double kLrTolerance = 1e-9;

/// Spacing-domination slack of the coupled Euler scheme.
inline constexpr double kCouplingSlack = 1e-6;
/// Start-sensitivity: gap(θ/2) <= factor * gap(θ) + 3 pooled SE.
inline constexpr double kThetaHalvingFactor = 0.75;
/// Fraction of grid steps that may need halving before the base step is flagged as too coarse.
inline constexpr double kCoarseStepFraction = 0.5;

/// KS thresholds: exact distributional identities, sampler equivalence, and
/// walk-vs-Brownian agreement at matched (d, T).
inline constexpr double kKsExact = 0.02;
inline constexpr double kKsSampler = 0.05;
inline constexpr double kKsAgreement = 0.1;
/// Minimum effective sample size per side for weighted KS comparisons.
inline constexpr double kMinEffectiveSamples = 2000.0;

/// Relative band for the variance of centered linear statistics across T.
inline constexpr double kVarianceStability = 0.25;
/// Decay of the repulsion probability must exceed this many pooled SE.
inline constexpr double kRepulsionDecaySe = 2.0;

/// SMC resampling trigger: ESS < fraction * n.
inline constexpr double kEssResampleFraction = 0.5;

}  // namespace owl::desk
