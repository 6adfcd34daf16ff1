#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "owl/estimate.hpp"
#include "owl/increments.hpp"
#include "owl/paths.hpp"
#include "owl/rng.hpp"

namespace owl {

enum class SamplerMethod { rejection, smc };
std::string_view to_string(SamplerMethod m);

/// Potential used for the Feynman-Kac weights.
enum class WeightKind { delta, h };

/// Weighted sample of walk ensembles. Particle i has positions
/// snapshots(i, k * d + j) for walker j at record_times[k]; the last record
/// time is always the horizon.
struct WeightedEnsembleSet {
    SamplerMethod method = SamplerMethod::rejection;
    int d = 0;
    double horizon = 0.0;
    std::vector<double> record_times;
    RowMatrix snapshots;
    std::vector<double> weights;         // normalized
    std::vector<std::uint8_t> survived;  // τ > horizon
    std::vector<PathEnsemble> paths;     // only when requested
    double ess = 0.0;
    std::vector<double> resample_times;
    /// Rejection: accepted / attempts. SMC: 1.
    double acceptance_rate = 1.0;
    std::uint64_t attempts = 0;
    /// SMC: log of the estimate of E_x[W(S(horizon)); τ > horizon] / Δ(x), W the potential.
    /// Rejection: log acceptance rate.
    double log_normalizer = 0.0;
    std::vector<std::string> warnings;
    std::string seed_fingerprint;

    std::size_t size() const { return weights.size(); }
    double position(std::size_t particle, std::size_t record, int walker) const {
        return snapshots(static_cast<Eigen::Index>(particle),
                         static_cast<Eigen::Index>(record * static_cast<std::size_t>(d)) + walker);
    }
    /// Positions at the horizon.
    std::vector<double> final_positions(std::size_t particle) const;
};

struct RejectionOptions {
    std::vector<double> record_times;  // horizon is appended when missing
    bool keep_paths = false;
};

/// i.i.d. free ensembles conditioned on τ > horizon. Attempt a uses
/// root.replica(a); accepted attempts are kept in index order.
/// Throws FeasibilityError when max_attempts is exhausted.
WeightedEnsembleSet sample_ordered_rejection(const WeylPoint& start, double horizon, const IncrementLaw& law,
                                             std::uint64_t n_accept, std::uint64_t max_attempts,
                                             const RngStream& root, const RejectionOptions& options = {});

struct SmcOptions {
    std::vector<double> record_times;
    double ess_fraction = 0.5;
    WeightKind weight = WeightKind::delta;
    /// Ties in the start are spread to spacing 1e-9 * sqrt(horizon) when set.
    bool perturb_packed = true;
};

/// Feynman-Kac particle system with potential W(S(t_k)) / W(S(t_{k-1})) on
/// checkpoints t_k = k * resample_every, killing on exit, and systematic
/// resampling when ESS < ess_fraction * n. Particle i draws from
/// root.replica(i) at generation g (the number of resampling steps so far).
WeightedEnsembleSet sample_ordered_smc(std::span<const double> start, double horizon, const IncrementLaw& law,
                                       std::uint64_t n_particles, double resample_every, const RngStream& root,
                                       const SmcOptions& options = {});

/// Equal-weight set reweighted by Δ(S(horizon)), the law the Δ-weighted SMC targets.
WeightedEnsembleSet reweighted_by_delta(WeightedEnsembleSet set);

/// Sorted eigenvalues of one replica on a time grid; every row strictly increasing.
struct EigenPath {
    int d = 0;
    std::vector<double> times;
    RowMatrix values;
};

/// H(t) = diag(start) + Hermitian Brownian motion: real diagonal entries with
/// variance t, off-diagonal real and imaginary parts with variance t/2 each.
/// Replica r uses root.replica(r).lane(lanes::kMatrix).
std::vector<EigenPath> nibm_matrix_marginals(std::span<const double> start, std::span<const double> times,
                                             std::uint64_t n, const RngStream& root);

/// λ_max of n independent draws of H(1) from 0.
std::vector<double> gue_max_eigenvalue_samples(int d, std::uint64_t n, const RngStream& root);

struct CoupledPaths {
    EigenPath y;
    EigenPath z;
    /// Grid steps that needed at least one halving.
    std::uint64_t halved_steps = 0;
    std::uint64_t grid_steps = 0;
    std::uint64_t clamped_drifts = 0;
    double min_substep = 0.0;
    /// More than the desk fraction of grid steps needed halving.
    bool step_too_coarse = false;
};

/// Euler scheme for dλ_i = dB_i + Σ_{j≠i} dt / (λ_i - λ_j), both systems
/// driven by the same increments. A substep of size h is halved while some
/// spacing is below 10 sqrt(h), down to step * 2^-20; drifts are clamped to
/// 1/sqrt(h). Throws FeasibilityError if a spacing collapses below 1e-12.
CoupledPaths dyson_sde_coupled(const WeylPoint& y0, const WeylPoint& z0, double horizon, double step,
                               const RngStream& stream);

enum class PathFunctional { top, bottom, spread };
std::string_view to_string(PathFunctional f);
double evaluate(PathFunctional f, std::span<const double> sorted_positions);

/// |E_y[f] - E_0[f]| for NIBM at time `horizon`, paired through shared matrix
/// noise. y = θ (2u - 1) with u sorted uniforms drawn per replica.
MCEstimate brownian_start_sensitivity(int d, double theta, double horizon, PathFunctional f, std::uint64_t n,
                                      const RngStream& root);

}  // namespace owl
