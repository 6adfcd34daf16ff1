#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "owl/estimate.hpp"
#include "owl/rng.hpp"

namespace owl {

/// Piecewise-linear density on a strictly increasing grid; zero off the grid.
class GridDensity {
  public:
    GridDensity() = default;
    /// Validates ordering, equal lengths and nonnegativity. Does not normalize.
    GridDensity(std::vector<double> grid, std::vector<double> values);

    std::span<const double> grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return grid_.size(); }

    double operator()(double x) const;
    double integral() const;
    double mean() const;
    /// Scales values so the trapezoid integral is one.
    GridDensity normalized() const;
    /// Midpoint log-concavity on grid triples (i, (i+j)/2, j) where the density is positive.
    bool is_log_concave(double tolerance = 1e-9) const;

    /// Two-column CSV with header `x,f`.
    static GridDensity from_csv(const std::string& path);

  private:
    std::vector<double> grid_;
    std::vector<double> values_;
};

enum class LawFamily { gaussian, centered_exponential, laplace_normalized, uniform_normalized, custom_grid };

std::string_view to_string(LawFamily family);

/// Centered, unit-variance increment distribution.
class IncrementLaw {
  public:
    static IncrementLaw gaussian();
    /// Law of E - 1 with E ~ Exp(1).
    static IncrementLaw centered_exponential();
    /// Laplace with scale 1/sqrt(2).
    static IncrementLaw laplace_normalized();
    /// Uniform on [-sqrt(3), sqrt(3)].
    static IncrementLaw uniform_normalized();
    /// Custom density, affinely standardized to mean 0 and variance 1.
    static IncrementLaw custom(const GridDensity& density);
    /// "gaussian", "centered-exponential", "laplace", "uniform", or "csv:<path>".
    static IncrementLaw from_name(std::string_view name);

    static std::vector<IncrementLaw> builtin();

    LawFamily family() const { return family_; }
    const std::string& name() const { return name_; }
    std::span<const double> params() const { return params_; }
    double mean() const { return mean_; }
    double variance() const { return variance_; }
    /// Supremum of δ with E exp(δ|X|) finite; +inf for light tails.
    double exp_moment_radius() const { return exp_moment_radius_; }
    bool log_concave() const { return log_concave_; }
    double support_lower() const { return lower_; }
    double support_upper() const { return upper_; }
    /// Standardized density of a custom law; empty for built-in families.
    const GridDensity& custom_density() const { return custom_; }

    /// Density; 0 off the support (for custom laws: off the grid).
    double density(double x) const;
    double cdf(double x) const;
    double sample(RngStream& stream) const;

  private:
    IncrementLaw() = default;
    void compute_moments();

    LawFamily family_ = LawFamily::gaussian;
    std::string name_;
    std::vector<double> params_;
    double mean_ = 0.0;
    double variance_ = 1.0;
    double exp_moment_radius_ = 0.0;
    bool log_concave_ = true;
    double lower_ = 0.0;
    double upper_ = 0.0;
    GridDensity custom_;
    std::vector<double> custom_cdf_;
};

/// Draw of X conditioned on X > 0 (sign = +1) or X < 0 (sign = -1), by
/// resampling. Throws FeasibilityError after 10^6 consecutive rejections.
double sample_signed_part(const IncrementLaw& law, int sign, RngStream& stream);

/// ζ = (X | X > 0) - (X' | X' < 0) + 1, always >= 1.
double sample_zeta(const IncrementLaw& law, RngStream& stream);

/// E[X | X > 0] and E[X | X < 0] by adaptive quadrature of the density.
std::pair<double, double> conditional_means(const IncrementLaw& law);

/// Density of ζ on `grid` by numerical convolution of the two conditioned
/// parts. The grid must start at or below 1 and carry all but 1e-4 of the mass.
GridDensity zeta_density(const IncrementLaw& law, std::span<const double> grid);

/// Density of (X - θ) | X > θ (side = +1) or -(X + θ) | X < -θ (side = -1)
/// restricted to `grid` and trapezoid-normalized. nullopt when the tail mass
/// is below 1e-12.
std::optional<GridDensity> conditioned_tail_density(const IncrementLaw& law, double theta, int side,
                                                    std::span<const double> grid);

struct LrOrderResult {
    bool holds = true;
    std::optional<std::pair<double, double>> witness;  // (u, w), u <= w
    double worst_margin = 0.0;                       // min over pairs of fU(u)fW(w) - fU(w)fW(u)
};

/// U ≤_lr W check: fU(u) fW(w) >= fU(w) fW(u) - tolerance for all grid pairs u <= w.
LrOrderResult lr_order_check(const GridDensity& fU, const GridDensity& fW, double tolerance);

struct TailLrEntry {
    double theta = 0.0;
    int side = +1;
    bool skipped = false;
    std::string note;
    LrOrderResult result;
    LrOrderResult refined;  // same check at doubled grid resolution
};

std::vector<TailLrEntry> conditional_tail_lr_check(const IncrementLaw& law, std::span<const double> thetas,
                                                   std::span<const double> grid, double tolerance = 1e-9);

/// Estimate of E[(W - U)^p W^q] with U ~ X | X > 0 and W ~ ζ independent.
/// Replica r draws from `root.replica(r)`.
MCEstimate phi_inequality_check(const IncrementLaw& law, int p, int q, std::uint64_t n, const RngStream& root);

/// Uniform grid of `points` values on [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t points);

}  // namespace owl
