#include "owl/harmonic.hpp"

#include <cmath>
#include <string>

#include "owl/errors.hpp"
#include "owl/parallel.hpp"

namespace owl {
namespace {

/// Δ(y)/Δ(x) as a real number.
double relative_vandermonde(std::span<const double> y, const LogSignedValue& delta_x) {
    return (vandermonde(y) / delta_x).to_real();
}

MCEstimate with_horizon(MCEstimate e, double horizon) {
    e.horizon = horizon;
    return e;
}

void require_time(double t, const char* op) {
    require(t >= 0.0 && std::isfinite(t), std::string(op) + ": t must be finite and >= 0");
}

}  // namespace

LogSignedValue vandermonde(std::span<const double> x) {
    LogSignedValue v = LogSignedValue::one();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) v *= LogSignedValue::from_real(x[j] - x[i]);
    return v;
}

LogSignedValue shifted_vandermonde(std::span<const double> x, std::span<const double> eta) {
    require(x.size() == eta.size(), "shifted_vandermonde: x and eta differ in length");
    LogSignedValue v = LogSignedValue::one();
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j)
            v *= LogSignedValue::from_real(x[j] - x[i] + (eta[j] - eta[i]));
    return v;
}

std::vector<double> sample_eta(const IncrementLaw& law, int d, RngStream& stream) {
    std::vector<double> eta(static_cast<std::size_t>(d), 0.0);
    for (int j = 1; j < d; ++j)
        eta[static_cast<std::size_t>(j)] = eta[static_cast<std::size_t>(j - 1)] + sample_zeta(law, stream);
    return eta;
}

MCEstimate estimate_free_vandermonde(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                                     const RngStream& root) {
    require(n >= 2, "estimate_free_vandermonde: n must be at least 2");
    require_time(t, "estimate_free_vandermonde");
    if (x.dim() == 1) return MCEstimate::exact(1.0, n, root.fingerprint());
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        FreeWalk walk(x.coords(), law, root.replica(r));
        walk.advance(t);
        a.add(relative_vandermonde(walk.positions(), dx));
    });
    return acc.estimate(root.fingerprint()).scaled(dx.to_real());
}

MCEstimate estimate_V_survival(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                               const RngStream& root) {
    require(n >= 100, "estimate_V_survival: n must be at least 100");
    require_time(t, "estimate_V_survival");
    if (x.dim() == 1) return with_horizon(MCEstimate::exact(1.0, n, root.fingerprint()), t);
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        FreeWalk walk(x.coords(), law, root.replica(r));
        a.add(walk.advance_in_chamber(t) ? relative_vandermonde(walk.positions(), dx) : 0.0);
    });
    return with_horizon(acc.estimate(root.fingerprint()).scaled(dx.to_real()), t);
}

MCEstimate estimate_V_stopped(const WeylPoint& x, double horizon, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root) {
    require(n >= 2, "estimate_V_stopped: n must be at least 2");
    require_time(horizon, "estimate_V_stopped");
    if (x.dim() == 1) return with_horizon(MCEstimate::exact(1.0, n, root.fingerprint()), horizon);
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        FreeWalk walk(x.coords(), law, root.replica(r));
        a.add(walk.advance_in_chamber(horizon) ? 1.0 : 1.0 - relative_vandermonde(walk.positions(), dx));
    });
    return with_horizon(acc.estimate(root.fingerprint()).scaled(dx.to_real()), horizon);
}

MCEstimate estimate_h(const WeylPoint& x, const IncrementLaw& law, std::uint64_t n, const RngStream& root) {
    require(n >= 2, "estimate_h: n must be at least 2");
    if (x.dim() == 1) return MCEstimate::exact(1.0, n, root.fingerprint());
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        RngStream s = root.replica(r).lane(lanes::kZeta);
        const auto eta = sample_eta(law, x.dim(), s);
        a.add((shifted_vandermonde(x.coords(), eta) / dx).to_real());
    });
    return acc.estimate(root.fingerprint()).scaled(dx.to_real());
}

MCEstimate superharmonic_deficit(const WeylPoint& x, double t, const IncrementLaw& law, std::uint64_t n,
                                 const RngStream& root) {
    require(n >= 2, "superharmonic_deficit: n must be at least 2");
    require_time(t, "superharmonic_deficit");
    if (x.dim() == 1) return with_horizon(MCEstimate::exact(0.0, n, root.fingerprint()), t);
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        const RngStream replica = root.replica(r);
        RngStream zs = replica.lane(lanes::kZeta);
        const auto eta = sample_eta(law, x.dim(), zs);
        double v = (shifted_vandermonde(x.coords(), eta) / dx).to_real();
        FreeWalk walk(x.coords(), law, replica);
        if (walk.advance_in_chamber(t)) v -= (shifted_vandermonde(walk.positions(), eta) / dx).to_real();
        a.add(v);
    });
    return with_horizon(acc.estimate(root.fingerprint()).scaled(dx.to_real()), t);
}

void require_in_W_eps(const WeylPoint& x, double t_scale, double eps) {
    require(t_scale > 1.0, "W_{t,eps}: t must exceed 1");
    require(eps > 0.0 && eps < 0.5, "W_{t,eps}: eps must lie in (0, 1/2)");
    const double threshold = w_eps_threshold(t_scale, eps);
    for (int j = 0; j + 1 < x.dim(); ++j) {
        const double gap = x[static_cast<std::size_t>(j + 1)] - x[static_cast<std::size_t>(j)];
        require(gap > threshold, "point is not in W_{t,eps}: spacing x_" + std::to_string(j + 2) + " - x_" +
                                     std::to_string(j + 1) + " = " + std::to_string(gap) +
                                     " does not exceed t^(1/2-eps) = " + std::to_string(threshold));
    }
}

MCEstimate ratio_V_over_delta(const WeylPoint& x, double t, double eps, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root) {
    require_in_W_eps(x, t, eps);
    require(n >= 2, "ratio_V_over_delta: n must be at least 2");
    if (x.dim() == 1) return with_horizon(MCEstimate::exact(1.0, n, root.fingerprint()), t);
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        FreeWalk walk(x.coords(), law, root.replica(r));
        a.add(walk.advance_in_chamber(t) ? relative_vandermonde(walk.positions(), dx) : 0.0);
    });
    return with_horizon(acc.estimate(root.fingerprint()), t);
}

MCEstimate ratio_delta_over_h(const WeylPoint& x, double t_scale, double eps, const IncrementLaw& law,
                              std::uint64_t n, const RngStream& root) {
    require_in_W_eps(x, t_scale, eps);
    if (x.dim() == 1) return MCEstimate::exact(1.0, n, root.fingerprint());
    const MCEstimate h = estimate_h(x, law, n, root).scaled(1.0 / vandermonde(x.coords()).to_real());
    return {1.0 / h.mean, h.se / (h.mean * h.mean), n, root.fingerprint(), std::nullopt};
}

MCEstimate moment_bound_probe(const WeylPoint& x, double t, double p, const IncrementLaw& law, std::uint64_t n,
                              const RngStream& root) {
    require(p >= 1.0, "moment_bound_probe: p must be at least 1");
    require(t > 0.0 && std::isfinite(t), "moment_bound_probe: t must be positive");
    require(n >= 2, "moment_bound_probe: n must be at least 2");
    for (int j = 0; j + 1 < x.dim(); ++j)
        require(x[static_cast<std::size_t>(j + 1)] - x[static_cast<std::size_t>(j)] >= 1.0,
                "moment_bound_probe: adjacent spacing x_" + std::to_string(j + 2) + " - x_" + std::to_string(j + 1) +
                    " is below 1");
    const int d = x.dim();
    const double norm = std::pow(t, static_cast<double>(d * d));
    if (d == 1) return MCEstimate::exact(1.0 / norm, n, root.fingerprint());
    const LogSignedValue dx = vandermonde(x.coords());
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        FreeWalk walk(x.coords(), law, root.replica(r));
        walk.advance(t);
        const LogSignedValue rel = vandermonde(walk.positions()) / dx;
        a.add(rel.is_zero() ? 0.0 : std::exp(p * rel.log_magnitude()));
    });
    const MCEstimate m = acc.estimate(root.fingerprint());
    const double root_p = std::pow(m.mean, 1.0 / p);
    const double se = m.mean > 0.0 ? root_p / (p * m.mean) * m.se : 0.0;
    return {root_p / norm, se / norm, n, root.fingerprint(), t};
}

WeylPoint spaced_point(int d, double spacing) {
    require(d >= 1, "spaced_point: d must be at least 1");
    require(spacing > 0.0, "spaced_point: spacing must be positive");
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = j * spacing;
    return WeylPoint(std::move(x));
}

}  // namespace owl
