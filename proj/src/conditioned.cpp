#include "owl/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Eigenvalues>

#include "owl/errors.hpp"
#include "owl/harmonic.hpp"
#include "owl/parallel.hpp"
#include "owl/tolerances.hpp"

namespace owl {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> normalized_record_times(std::vector<double> times, double horizon) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (double t : times)
        require(t >= 0.0 && t <= horizon, "record time " + std::to_string(t) + " outside [0, horizon]");
    if (times.empty() || times.back() != horizon) times.push_back(horizon);
    return times;
}

void store_row(RowMatrix& snaps, std::size_t particle, std::size_t record, std::span<const double> pos) {
    const auto d = static_cast<Eigen::Index>(pos.size());
    for (Eigen::Index j = 0; j < d; ++j)
        snaps(static_cast<Eigen::Index>(particle), static_cast<Eigen::Index>(record) * d + j) =
            pos[static_cast<std::size_t>(j)];
}

double potential(WeightKind kind, std::span<const double> pos, const std::vector<double>& eta) {
    return kind == WeightKind::delta ? vandermonde(pos).log_magnitude()
                                     : shifted_vandermonde(pos, eta).log_magnitude();
}

using ComplexMatrix = Eigen::MatrixXcd;

/// Adds a Hermitian Brownian increment over dt.
void hermitian_increment(ComplexMatrix& h, double dt, RngStream& s) {
    const Eigen::Index d = h.rows();
    const double sd_diag = std::sqrt(dt);
    const double sd_off = std::sqrt(dt / 2.0);
    for (Eigen::Index i = 0; i < d; ++i) {
        h(i, i) += sd_diag * s.normal();
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double re = sd_off * s.normal();
            const double im = sd_off * s.normal();
            h(i, j) += std::complex<double>(re, im);
            h(j, i) = std::conj(h(i, j));
        }
    }
}

/// Ascending eigenvalues, or nullopt on solver failure or a tie.
std::optional<Eigen::VectorXd> sorted_eigenvalues(const ComplexMatrix& h) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) return std::nullopt;
    Eigen::VectorXd ev = solver.eigenvalues();
    for (Eigen::Index i = 0; i + 1 < ev.size(); ++i)
        if (!(ev(i) < ev(i + 1))) return std::nullopt;
    return ev;
}

std::optional<EigenPath> matrix_path(std::span<const double> start, std::span<const double> times, RngStream s) {
    const auto d = static_cast<Eigen::Index>(start.size());
    ComplexMatrix h = ComplexMatrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) h(i, i) = start[static_cast<std::size_t>(i)];
    EigenPath path{static_cast<int>(d), std::vector<double>(times.begin(), times.end()),
                   RowMatrix(static_cast<Eigen::Index>(times.size()), d)};
    double prev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        hermitian_increment(h, times[k] - prev, s);
        prev = times[k];
        const auto ev = sorted_eigenvalues(h);
        if (!ev) return std::nullopt;
        path.values.row(static_cast<Eigen::Index>(k)) = ev->transpose();
    }
    return path;
}

double min_gap(const std::vector<double>& x) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < x.size(); ++j) m = std::min(m, x[j + 1] - x[j]);
    return m;
}

void euler_substep(std::vector<double>& x, const std::vector<double>& db, double h, std::uint64_t& clamped) {
    const std::size_t d = x.size();
    const double cap = 1.0 / std::sqrt(h);
    std::vector<double> drift(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            if (j != i) drift[i] += 1.0 / (x[i] - x[j]);
        if (std::abs(drift[i]) > cap) {
            drift[i] = std::copysign(cap, drift[i]);
            ++clamped;
        }
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += db[i] + drift[i] * h;
}

}  // namespace

std::string_view to_string(SamplerMethod m) { return m == SamplerMethod::rejection ? "rejection" : "smc"; }

std::vector<double> WeightedEnsembleSet::final_positions(std::size_t particle) const {
    std::vector<double> out(static_cast<std::size_t>(d));
    const std::size_t last = record_times.size() - 1;
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = position(particle, last, j);
    return out;
}

WeightedEnsembleSet sample_ordered_rejection(const WeylPoint& start, double horizon, const IncrementLaw& law,
                                             std::uint64_t n_accept, std::uint64_t max_attempts,
                                             const RngStream& root, const RejectionOptions& options) {
    require(horizon > 0.0 && std::isfinite(horizon), "sample_ordered_rejection: horizon must be positive");
    require(n_accept >= 1, "sample_ordered_rejection: n_accept must be at least 1");
    require(max_attempts >= n_accept, "sample_ordered_rejection: max_attempts must be at least n_accept");
    const int d = start.dim();
    WeightedEnsembleSet set;
    set.method = SamplerMethod::rejection;
    set.d = d;
    set.horizon = horizon;
    set.record_times = normalized_record_times(options.record_times, horizon);
    set.seed_fingerprint = root.fingerprint();
    const std::size_t records = set.record_times.size();
    set.snapshots.resize(static_cast<Eigen::Index>(n_accept), static_cast<Eigen::Index>(records) * d);

    struct Attempt {
        bool accepted = false;
        std::vector<double> rows;
        std::optional<PathEnsemble> path;
    };
    constexpr std::uint64_t kBatch = 4 * kChunkSize;
    std::uint64_t accepted = 0, attempts = 0;
    while (accepted < n_accept && attempts < max_attempts) {
        const std::uint64_t batch = std::min(kBatch, max_attempts - attempts);
        std::vector<Attempt> results(batch);
        parallel_for(batch, [&](std::size_t i) {
            Attempt& a = results[i];
            const RngStream replica = root.replica(attempts + i);
            if (options.keep_paths) {
                PathEnsemble ens = simulate_free(d, start.coords(), horizon, law, replica);
                if (exit_time(ens).reached()) return;
                for (double t : set.record_times) {
                    const auto p = ens.positions_at(t);
                    a.rows.insert(a.rows.end(), p.begin(), p.end());
                }
                a.path.emplace(std::move(ens));
            } else {
                FreeWalk walk(start.coords(), law, replica);
                for (double t : set.record_times) {
                    if (!walk.advance_in_chamber(t)) return;
                    a.rows.insert(a.rows.end(), walk.positions().begin(), walk.positions().end());
                }
            }
            a.accepted = true;
        });
        for (std::uint64_t i = 0; i < batch && accepted < n_accept; ++i) {
            ++attempts;
            if (!results[i].accepted) continue;
            for (std::size_t c = 0; c < results[i].rows.size(); ++c)
                set.snapshots(static_cast<Eigen::Index>(accepted), static_cast<Eigen::Index>(c)) = results[i].rows[c];
            if (options.keep_paths) set.paths.push_back(std::move(*results[i].path));
            ++accepted;
        }
    }
    set.attempts = attempts;
    set.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(attempts);
    if (accepted < n_accept)
        throw FeasibilityError("sample_ordered_rejection: accepted " + std::to_string(accepted) + " of " +
                               std::to_string(n_accept) + " after " + std::to_string(attempts) +
                               " attempts (acceptance rate " + std::to_string(set.acceptance_rate) +
                               "); raise max_attempts or use the SMC sampler");
    set.weights.assign(n_accept, 1.0 / static_cast<double>(n_accept));
    set.survived.assign(n_accept, 1);
    set.ess = static_cast<double>(n_accept);
    set.log_normalizer = std::log(set.acceptance_rate);
    return set;
}

WeightedEnsembleSet sample_ordered_smc(std::span<const double> start_in, double horizon, const IncrementLaw& law,
                                       std::uint64_t n_particles, double resample_every, const RngStream& root,
                                       const SmcOptions& options) {
    require(!start_in.empty(), "sample_ordered_smc: d must be at least 1");
    require(horizon > 0.0 && std::isfinite(horizon), "sample_ordered_smc: horizon must be positive");
    require(resample_every > 0.0 && resample_every <= horizon,
            "sample_ordered_smc: resample_every must lie in (0, horizon]");
    require(n_particles >= 2, "sample_ordered_smc: need at least 2 particles");
    require(options.ess_fraction > 0.0 && options.ess_fraction <= 1.0,
            "sample_ordered_smc: ess_fraction must lie in (0, 1]");

    WeightedEnsembleSet set;
    set.method = SamplerMethod::smc;
    set.d = static_cast<int>(start_in.size());
    set.horizon = horizon;
    set.record_times = normalized_record_times(options.record_times, horizon);
    set.seed_fingerprint = root.fingerprint();

    std::vector<double> start(start_in.begin(), start_in.end());
    if (!WeylPoint::is_ordered(start)) {
        for (std::size_t j = 0; j + 1 < start.size(); ++j)
            require(start[j] <= start[j + 1], "start is not in the Weyl chamber: x_" + std::to_string(j + 1) +
                                                  " > x_" + std::to_string(j + 2));
        require(options.perturb_packed, "start is not in the Weyl chamber (tied coordinates) and perturbation is off");
        const double spacing = 1e-9 * std::sqrt(horizon);
        for (std::size_t j = 0; j < start.size(); ++j) start[j] += static_cast<double>(j) * spacing;
        set.warnings.push_back("packed start perturbed to spacing " + std::to_string(spacing));
    }
    const WeylPoint x(start);

    const std::size_t n = n_particles;
    const int d = set.d;
    const double log_dx = vandermonde(x.coords()).log_magnitude();
    std::vector<FreeWalk> walks;
    walks.reserve(n);
    std::vector<std::vector<double>> eta(n);
    std::vector<double> ref(n), logw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const RngStream replica = root.replica(i);
        walks.emplace_back(x.coords(), law, replica);
        if (options.weight == WeightKind::h) {
            RngStream zs = replica.lane(lanes::kZeta);
            eta[i] = sample_eta(law, d, zs);
        }
        ref[i] = potential(options.weight, x.coords(), eta[i]);
        logw[i] = ref[i] - log_dx;
    }
    set.snapshots.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(set.record_times.size()) * d);

    std::vector<double> checkpoints;
    for (std::uint64_t k = 1; static_cast<double>(k) * resample_every < horizon; ++k)
        checkpoints.push_back(static_cast<double>(k) * resample_every);
    checkpoints.push_back(horizon);
    std::vector<double> stops = checkpoints;
    stops.insert(stops.end(), set.record_times.begin(), set.record_times.end());
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    std::uint32_t generation = 0;
    std::size_t next_record = 0, next_check = 0;
    const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
    for (double t : stops) {
        const bool is_record = next_record < set.record_times.size() && set.record_times[next_record] == t;
        const bool is_check = next_check < checkpoints.size() && checkpoints[next_check] == t;
        parallel_for(chunks, [&](std::size_t c) {
            const std::size_t hi = std::min(n, (c + 1) * kChunkSize);
            for (std::size_t i = c * kChunkSize; i < hi; ++i) {
                if (walks[i].alive() && !walks[i].advance_in_chamber(t)) logw[i] = kNegInf;
                if (is_record) store_row(set.snapshots, i, next_record, walks[i].positions());
                if (is_check && walks[i].alive()) {
                    const double now = potential(options.weight, walks[i].positions(), eta[i]);
                    logw[i] += now - ref[i];
                    ref[i] = now;
                }
            }
        });
        if (is_record) ++next_record;
        if (!is_check) continue;
        ++next_check;

        const double top = *std::max_element(logw.begin(), logw.end());
        if (top == kNegInf)
            throw FeasibilityError("sample_ordered_smc: every particle left the chamber by t = " + std::to_string(t) +
                                   "; use a smaller resample_every or more particles");
        double s1 = 0.0, s2 = 0.0;
        for (double lw : logw) {
            const double w = std::exp(lw - top);
            s1 += w;
            s2 += w * w;
        }
        const double ess = s1 * s1 / s2;
        const double log_mean = top + std::log(s1 / static_cast<double>(n));
        if (t == horizon) {
            set.log_normalizer += log_mean;
            set.ess = ess;
            set.weights.resize(n);
            for (std::size_t i = 0; i < n; ++i) set.weights[i] = std::exp(logw[i] - top) / s1;
            break;
        }
        if (ess >= options.ess_fraction * static_cast<double>(n)) continue;

        set.log_normalizer += log_mean;
        set.resample_times.push_back(t);
        RngStream us = root.replica(generation).lane(lanes::kScalar);
        const double u0 = us.uniform();
        std::vector<double> cumulative(n);
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) cumulative[i] = c += std::exp(logw[i] - top) / s1;
        std::vector<std::size_t> ancestor(n);
        std::size_t a = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = (static_cast<double>(i) + u0) / static_cast<double>(n);
            while (a + 1 < n && cumulative[a] < target) ++a;
            while (logw[a] == kNegInf) --a;  // rounding at the top end
            ancestor[i] = a;
        }
        ++generation;
        std::vector<FreeWalk> next_walks;
        next_walks.reserve(n);
        std::vector<std::vector<double>> next_eta(n);
        std::vector<double> next_ref(n);
        RowMatrix next_snaps(set.snapshots.rows(), set.snapshots.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = ancestor[i];
            next_walks.push_back(walks[k]);
            next_walks.back().rekey(root.replica(i), generation);
            next_eta[i] = eta[k];
            next_ref[i] = ref[k];
            next_snaps.row(static_cast<Eigen::Index>(i)) = set.snapshots.row(static_cast<Eigen::Index>(k));
        }
        walks = std::move(next_walks);
        eta = std::move(next_eta);
        ref = std::move(next_ref);
        set.snapshots = std::move(next_snaps);
        std::fill(logw.begin(), logw.end(), 0.0);
    }
    set.survived.resize(n);
    for (std::size_t i = 0; i < n; ++i) set.survived[i] = walks[i].alive() ? 1 : 0;
    return set;
}

WeightedEnsembleSet reweighted_by_delta(WeightedEnsembleSet set) {
    std::vector<double> logv(set.size());
    double top = kNegInf;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto v = vandermonde(set.final_positions(i));
        logv[i] = v.sign() > 0 && set.weights[i] > 0.0 ? v.log_magnitude() + std::log(set.weights[i]) : kNegInf;
        top = std::max(top, logv[i]);
    }
    require(top > kNegInf, "reweighted_by_delta: no particle carries positive weight");
    double s1 = 0.0, s2 = 0.0;
    for (double lv : logv) {
        const double w = std::exp(lv - top);
        s1 += w;
        s2 += w * w;
    }
    for (std::size_t i = 0; i < set.size(); ++i) set.weights[i] = std::exp(logv[i] - top) / s1;
    set.ess = s1 * s1 / s2;
    return set;
}

std::vector<EigenPath> nibm_matrix_marginals(std::span<const double> start, std::span<const double> times,
                                             std::uint64_t n, const RngStream& root) {
    require(!start.empty(), "nibm_matrix_marginals: d must be at least 1");
    for (std::size_t k = 0; k < times.size(); ++k) {
        require(times[k] >= 0.0 && std::isfinite(times[k]), "nibm_matrix_marginals: times must be finite and >= 0");
        if (k > 0) require(times[k] > times[k - 1], "nibm_matrix_marginals: times must increase");
    }
    std::vector<EigenPath> out(n);
    parallel_for(n, [&](std::size_t r) {
        const RngStream replica = root.replica(r);
        auto path = matrix_path(start, times, replica.lane(lanes::kMatrix));
        if (!path) path = matrix_path(start, times, replica.lane(lanes::kMatrix + 1));
        if (!path)
            throw FeasibilityError("nibm_matrix_marginals: eigenvalues of replica " + std::to_string(r) +
                                   " not strictly ordered after one redraw");
        out[r] = std::move(*path);
    });
    return out;
}

std::vector<double> gue_max_eigenvalue_samples(int d, std::uint64_t n, const RngStream& root) {
    require(d >= 1, "gue_max_eigenvalue_samples: d must be at least 1");
    std::vector<double> out(n);
    const auto dd = static_cast<Eigen::Index>(d);
    parallel_for(n, [&](std::size_t r) {
        const RngStream replica = root.replica(r);
        for (std::uint32_t attempt = 0; attempt < 2; ++attempt) {
            RngStream s = replica.lane(lanes::kMatrix + attempt);
            ComplexMatrix h = ComplexMatrix::Zero(dd, dd);
            hermitian_increment(h, 1.0, s);
            if (const auto ev = sorted_eigenvalues(h)) {
                out[r] = (*ev)(dd - 1);
                return;
            }
        }
        throw FeasibilityError("gue_max_eigenvalue_samples: eigen-decomposition failed twice");
    });
    return out;
}

CoupledPaths dyson_sde_coupled(const WeylPoint& y0, const WeylPoint& z0, double horizon, double step,
                               const RngStream& stream) {
    require(y0.dim() == z0.dim(), "dyson_sde_coupled: y0 and z0 differ in dimension");
    require(horizon > 0.0 && std::isfinite(horizon), "dyson_sde_coupled: horizon must be positive");
    require(step > 0.0 && step <= horizon, "dyson_sde_coupled: step must lie in (0, horizon]");
    for (int j = 0; j + 1 < y0.dim(); ++j) {
        const auto a = static_cast<std::size_t>(j);
        require(y0[a + 1] - y0[a] >= z0[a + 1] - z0[a],
                "dyson_sde_coupled: spacing y_" + std::to_string(j + 2) + " - y_" + std::to_string(j + 1) +
                    " is smaller than the matching z spacing");
    }
    const int d = y0.dim();
    const auto grid = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
    CoupledPaths out;
    out.y.d = out.z.d = d;
    out.y.times.resize(grid + 1);
    for (std::size_t k = 0; k <= grid; ++k) out.y.times[k] = std::min(static_cast<double>(k) * step, horizon);
    out.z.times = out.y.times;
    out.y.values.resize(static_cast<Eigen::Index>(grid + 1), d);
    out.z.values.resize(static_cast<Eigen::Index>(grid + 1), d);
    std::vector<double> y(y0.coords().begin(), y0.coords().end());
    std::vector<double> z(z0.coords().begin(), z0.coords().end());
    for (int j = 0; j < d; ++j) {
        out.y.values(0, j) = y[static_cast<std::size_t>(j)];
        out.z.values(0, j) = z[static_cast<std::size_t>(j)];
    }
    // Substeps are step * 2^-m, counted in units of step * 2^-20.
    constexpr std::uint64_t kUnits = std::uint64_t{1} << 20;
    const double unit = step / static_cast<double>(kUnits);
    out.min_substep = step;
    out.grid_steps = grid;
    RngStream s = stream;
    std::vector<double> db(static_cast<std::size_t>(d));
    for (std::size_t k = 1; k <= grid; ++k) {
        const double span = out.y.times[k] - out.y.times[k - 1];
        std::uint64_t remaining = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(span / unit)));
        std::uint64_t h_units = kUnits;
        bool halved = false;
        while (remaining > 0) {
            h_units = std::min(h_units, remaining);
            while (h_units > 1 && std::min(min_gap(y), min_gap(z)) < 10.0 * std::sqrt(h_units * unit)) {
                h_units /= 2;
                halved = true;
            }
            const double h = static_cast<double>(h_units) * unit;
            out.min_substep = std::min(out.min_substep, h);
            for (double& b : db) b = std::sqrt(h) * s.normal();
            euler_substep(y, db, h, out.clamped_drifts);
            euler_substep(z, db, h, out.clamped_drifts);
            remaining -= h_units;
            if (!(std::min(min_gap(y), min_gap(z)) > 1e-12))
                throw FeasibilityError("dyson_sde_coupled: spacing collapsed below 1e-12 at t = " +
                                       std::to_string(out.y.times[k] - static_cast<double>(remaining) * unit) +
                                       " (step too coarse)");
        }
        if (halved) ++out.halved_steps;
        for (int j = 0; j < d; ++j) {
            out.y.values(static_cast<Eigen::Index>(k), j) = y[static_cast<std::size_t>(j)];
            out.z.values(static_cast<Eigen::Index>(k), j) = z[static_cast<std::size_t>(j)];
        }
    }
    out.step_too_coarse =
        static_cast<double>(out.halved_steps) > desk::kCoarseStepFraction * static_cast<double>(out.grid_steps);
    return out;
}

std::string_view to_string(PathFunctional f) {
    switch (f) {
        case PathFunctional::top: return "top";
        case PathFunctional::bottom: return "bottom";
        case PathFunctional::spread: return "spread";
    }
    return "?";
}

double evaluate(PathFunctional f, std::span<const double> x) {
    switch (f) {
        case PathFunctional::top: return x.back();
        case PathFunctional::bottom: return x.front();
        case PathFunctional::spread: return x.back() - x.front();
    }
    return 0.0;
}

MCEstimate brownian_start_sensitivity(int d, double theta, double horizon, PathFunctional f, std::uint64_t n,
                                      const RngStream& root) {
    require(d >= 1, "brownian_start_sensitivity: d must be at least 1");
    require(theta >= 0.0 && std::isfinite(theta), "brownian_start_sensitivity: theta must be >= 0");
    require(horizon > 0.0, "brownian_start_sensitivity: horizon must be positive");
    require(n >= 2, "brownian_start_sensitivity: n must be at least 2");
    const auto dd = static_cast<Eigen::Index>(d);
    const auto acc = reduce_replicas<Accumulator>(n, [&](Accumulator& a, std::uint64_t r) {
        const RngStream replica = root.replica(r);
        RngStream us = replica.lane(lanes::kScalar);
        std::vector<double> u(static_cast<std::size_t>(d));
        for (double& v : u) v = us.uniform();
        std::sort(u.begin(), u.end());
        RngStream ms = replica.lane(lanes::kMatrix);
        ComplexMatrix g = ComplexMatrix::Zero(dd, dd);
        hermitian_increment(g, horizon, ms);
        ComplexMatrix hy = g;
        for (Eigen::Index i = 0; i < dd; ++i) hy(i, i) += theta * (2.0 * u[static_cast<std::size_t>(i)] - 1.0);
        const auto e0 = sorted_eigenvalues(g);
        const auto ey = sorted_eigenvalues(hy);
        if (!e0 || !ey) throw FeasibilityError("brownian_start_sensitivity: eigen-decomposition failed");
        a.add(evaluate(f, std::span<const double>(ey->data(), static_cast<std::size_t>(d))) -
              evaluate(f, std::span<const double>(e0->data(), static_cast<std::size_t>(d))));
    });
    MCEstimate e = acc.estimate(root.fingerprint());
    e.mean = std::abs(e.mean);
    e.horizon = horizon;
    return e;
}

}  // namespace owl
