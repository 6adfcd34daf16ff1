#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace owl {

/// Monte Carlo mean with its standard error and provenance.
struct MCEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::uint64_t n = 0;
    std::string seed_fingerprint;
    /// Set on τ-dependent estimates: the simulation horizon that truncates τ.
    std::optional<double> horizon;

    /// Known value with zero error (degenerate cases such as d = 1).
    static MCEstimate exact(double value, std::uint64_t n, std::string fingerprint = {}) {
        return {value, 0.0, n, std::move(fingerprint), std::nullopt};
    }

    MCEstimate scaled(double factor) const {
        return {mean * factor, se * std::abs(factor), n, seed_fingerprint, horizon};
    }
};

/// sqrt(se_a^2 + se_b^2), the scale for comparing two independent estimates.
inline double pooled_se(const MCEstimate& a, const MCEstimate& b) {
    return std::hypot(a.se, b.se);
}

/// Pools two estimates of the same quantity over disjoint replica sets.
MCEstimate merge(const MCEstimate& a, const MCEstimate& b);

/// Streaming mean/variance (Welford), mergeable with Chan's formula.
class Accumulator {
  public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    void merge(const Accumulator& other);

    /// Rebuilds an accumulator from serialized state.
    static Accumulator from_state(std::uint64_t n, double mean, double m2) {
        Accumulator a;
        a.n_ = n;
        a.mean_ = mean;
        a.m2_ = m2;
        return a;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }
    /// Unbiased sample variance; 0 for n < 2.
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

    MCEstimate estimate(std::string fingerprint = {}) const;

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace owl
