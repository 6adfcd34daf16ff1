#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "owl/conditioned.hpp"
#include "owl/paths.hpp"

namespace owl {

/// Replica positions at a common list of times with optional weights.
/// values(r, k * d + j) is walker j (ascending order) of replica r at times[k].
struct SnapshotSet {
    int d = 0;
    std::vector<double> times;
    RowMatrix values;
    std::vector<double> weights;  // normalized; empty means equal weights

    static SnapshotSet from(const WeightedEnsembleSet& set);
    static SnapshotSet from(const std::vector<EigenPath>& paths);
    static SnapshotSet from(const std::vector<PathEnsemble>& paths, std::span<const double> times);

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
    double horizon() const { return times.empty() ? 0.0 : times.back(); }
    double at(std::size_t replica, std::size_t time_index, int walker) const {
        return values(static_cast<Eigen::Index>(replica), static_cast<Eigen::Index>(time_index) * d + walker);
    }
    /// Index of t in times (relative match 1e-12); PreconditionError naming t otherwise.
    std::size_t time_index(double t) const;
    /// Normalized weights, filled in when the set is unweighted.
    std::vector<double> normalized_weights() const;
};

/// T^a = d, the exponent tying dimension to the time scale.
double default_edge_exponent(int d, double T);

/// Source times T + 2 T^(1 - a/3) t for t on the edge grid.
std::vector<double> edge_source_times(double T, double a, std::span<const double> grid);
/// Uniform grid of grid_size points on [-L, L]; {0} when grid_size = 1.
std::vector<double> edge_grid(double L, std::size_t grid_size);
double edge_required_horizon(double T, double a, double L);

/// Top-k rescaled lines of one replica; lines(i, g) is line i + 1 at time_grid[g], line 1 on top.
struct EdgeEnsemble {
    double T = 0.0;
    double a = 0.0;
    int d = 0;
    int k = 0;
    double L = 0.0;
    std::vector<double> time_grid;
    RowMatrix lines;
};

/// X_i^T(t) = T^(a/6 - 1/2) (S_{d-i+1}(T + 2 T^(1-a/3) t) - 2 T^(1/2 + a/2) - 2 T^(1/2 + a/6) t).
EdgeEnsemble edge_rescale(const SnapshotSet& source, std::size_t replica, double T, double a, int k, double L,
                          std::size_t grid_size);
EdgeEnsemble edge_rescale(const PathEnsemble& source, double T, double a, int k, double L, std::size_t grid_size);
std::vector<EdgeEnsemble> edge_rescale_all(const SnapshotSet& source, double T, double a, int k, double L,
                                           std::size_t grid_size);

/// T^(a/6 - 1/2) (S_d(T) - 2 T^(1/2 + a/2)) per replica.
std::vector<double> top_particle_statistic(const SnapshotSet& source, double T, double a);
double top_particle_statistic(const PathEnsemble& source, double T, double a);

/// f(w) = Σ_i p_i(w(t_i)) with polynomials p_i of degree at most 4.
struct LinearStatisticSpec {
    std::vector<double> eval_times;                 // in [delta, 1]
    std::vector<std::vector<double>> coefficients;  // p_i(w) = Σ_k c_k w^k
    double delta = 0.0;

    void validate() const;
    /// Source times T t_i.
    std::vector<double> source_times(double T) const;
    /// w(1)^2.
    static LinearStatisticSpec final_square(double delta = 1.0);
    /// f ≡ 1.
    static LinearStatisticSpec constant_one(double delta = 1.0);
};

/// X_T(f) = Σ_j f(T^(-1/2 - a/2) S_j(T ·)) per replica.
std::vector<double> linear_statistic(const SnapshotSet& source, const LinearStatisticSpec& spec, double T, double a);

/// Values with normalized weights (empty weights: equal).
struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;

    double mean() const;
    /// Standard error of the weighted mean, sqrt(Σ w_i^2 (x_i - m)^2).
    double se() const;
    double ess() const;
};

struct TwoSampleReport {
    double ks = 0.0;
    double mean_gap = 0.0;  // mean(A) - mean(B)
    double pooled_se = 0.0;
    double ess_a = 0.0;
    double ess_b = 0.0;
};

/// Weighted two-sample Kolmogorov-Smirnov distance; tied values are stepped together.
TwoSampleReport two_sample_report(const WeightedSample& a, const WeightedSample& b);

/// Bounded uniformly continuous maps for the centered-statistic comparisons.
enum class GMap { identity_clipped, tanh, smooth_indicator };
std::string_view to_string(GMap g);
GMap g_map_from_name(std::string_view name);
double apply(GMap g, double x);

/// g(x_i - weighted mean) per replica.
std::vector<double> centered_statistic_samples(const WeightedSample& stat, GMap g);

}  // namespace owl
