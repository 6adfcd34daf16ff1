#include <cmath>
#include <functional>
#include <numbers>

#include "io.hpp"
#include "owl/errors.hpp"
#include "owl/harmonic.hpp"
#include "owl/parallel.hpp"
#include "runner.hpp"

namespace owl::cli {
namespace {

using nlohmann::json;

struct Counter {
    std::uint64_t count = 0;
    void merge(const Counter& o) { count += o.count; }
};

RngStream stream(const ExperimentConfig& c, std::uint32_t criterion, std::uint32_t cell = 0) {
    return RngStream(*c.seed, {100 + criterion * 64 + cell, 0, 0});
}

bool quick(const ExperimentConfig& c) { return c.scale == Scale::quick; }

std::uint64_t pick(const ExperimentConfig& c, std::uint64_t desk, std::uint64_t small) {
    return quick(c) ? small : desk;
}

/// Runs one criterion; exceptions become failing entries.
json criterion(const std::string& name, const std::function<json()>& body) {
    json entry;
    try {
        entry = body();
    } catch (const std::exception& e) {
        entry = {{"pass", false}, {"error", e.what()}};
    }
    entry["name"] = name;
    return entry;
}

json estimate_json(const MCEstimate& e) { return {{"mean", e.mean}, {"se", e.se}, {"n", e.n}}; }

const std::vector<std::string> kTwoLaws{"gaussian", "centered-exponential"};

// ---------------------------------------------------------------------------
// inequalities

json harmonicity(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 2000);
    json cells = json::array();
    bool pass = true;
    std::uint32_t cell = 0;
    for (int d : {2, 3})
        for (const auto& name : kTwoLaws)
            for (double t : {1.0, 10.0}) {
                const WeylPoint x = spaced_point(d, 1.0);
                const double dx = vandermonde(x.coords()).to_real();
                const auto e = estimate_free_vandermonde(x, t, IncrementLaw::from_name(name), n, stream(c, 0, cell++));
                const bool ok = std::abs(e.mean - dx) <= c.tol.agreement_se * e.se;
                pass = pass && ok;
                cells.push_back({{"d", d}, {"law", name}, {"t", t}, {"delta_x", dx}, {"estimate", estimate_json(e)},
                                 {"pass", ok}});
            }
    return {{"pass", pass}, {"tolerance_se", c.tol.agreement_se}, {"cells", cells}};
}

json superharmonicity(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 2000);
    json cells = json::array();
    bool pass = true;
    std::uint32_t cell = 0;
    for (int d : {2, 3, 4})
        for (const auto& name : kTwoLaws)
            for (double t : {1.0, 5.0}) {
                const auto e = superharmonic_deficit(spaced_point(d, 1.0), t, IncrementLaw::from_name(name), n,
                                                     stream(c, 1, cell++));
                const bool ok = e.mean >= -c.tol.inequality_se * e.se;
                pass = pass && ok;
                cells.push_back({{"d", d}, {"law", name}, {"t", t}, {"deficit", estimate_json(e)}, {"pass", ok}});
            }
    return {{"pass", pass}, {"tolerance_se", c.tol.inequality_se}, {"cells", cells}};
}

json v_and_delta_below_h(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 2000);
    json cells = json::array();
    bool pass = true;
    std::uint32_t cell = 0;
    for (int d : {2, 3, 4})
        for (const auto& name : kTwoLaws)
            for (double t : {1.0, 5.0}) {
                const auto law = IncrementLaw::from_name(name);
                const WeylPoint x = spaced_point(d, 1.0);
                const RngStream root = stream(c, 2, cell);
                const RngStream h_root = stream(c, 2, 32 + cell++);
                // Pathwise: Δ(y) <= Π(y_j - y_i + η_j - η_i) at y = x and at y = S(t) on survival.
                const auto violations = reduce_replicas<Counter>(n, [&](Counter& k, std::uint64_t r) {
                    RngStream zs = root.replica(r).lane(lanes::kZeta);
                    const auto eta = sample_eta(law, d, zs);
                    if (shifted_vandermonde(x.coords(), eta) < vandermonde(x.coords())) ++k.count;
                    FreeWalk walk(x.coords(), law, root.replica(r));
                    if (walk.advance_in_chamber(t) &&
                        shifted_vandermonde(walk.positions(), eta) < vandermonde(walk.positions()))
                        ++k.count;
                });
                const auto h = estimate_h(x, law, n, h_root);
                const auto v = estimate_V_survival(x, t, law, n, root);
                const double dx = vandermonde(x.coords()).to_real();
                const bool v_ok = v.mean <= h.mean + c.tol.inequality_se * pooled_se(v, h);
                const bool d_ok = dx <= h.mean + c.tol.inequality_se * h.se;
                const bool ok = violations.count == 0 && v_ok && d_ok;
                pass = pass && ok;
                cells.push_back({{"d", d},
                                 {"law", name},
                                 {"t", t},
                                 {"pathwise_violations", violations.count},
                                 {"V_t", estimate_json(v)},
                                 {"h", estimate_json(h)},
                                 {"delta_x", dx},
                                 {"pass", ok}});
            }
    return {{"pass", pass}, {"cells", cells}};
}

/// Equal spacing 1.001 t^0.45, just inside W_{t,0.05}.
WeylPoint region_point(double t) { return spaced_point(3, 1.001 * std::pow(t, 0.5 - desk::kRegionEps)); }

json v_sim_delta(const ExperimentConfig& c) {
    const double t1 = quick(c) ? 100.0 : 1e4;
    const double t2 = quick(c) ? 1e4 : 1e6;
    const std::uint64_t n1 = pick(c, 100000, 2000);
    const std::uint64_t n2 = pick(c, 1000, 200);
    const auto law = IncrementLaw::gaussian();
    const auto r1 = ratio_V_over_delta(region_point(t1), t1, desk::kRegionEps, law, n1, stream(c, 3, 0));
    const auto r2 = ratio_V_over_delta(region_point(t2), t2, desk::kRegionEps, law, n2, stream(c, 3, 1));
    const bool in_band = r1.mean >= c.tol.ratio_floor && r1.mean <= 1.0 + c.tol.inequality_se * r1.se;
    const bool not_worse = r2.mean >= r1.mean - c.tol.inequality_se * pooled_se(r1, r2);
    return {{"pass", in_band && not_worse},
            {"band", {c.tol.ratio_floor, 1.0 + c.tol.inequality_se * r1.se}},
            {"ratio_t1", estimate_json(r1)},
            {"t1", t1},
            {"ratio_t2", estimate_json(r2)},
            {"t2", t2},
            {"in_band", in_band},
            {"not_worse_at_t2", not_worse}};
}

json delta_over_h(const ExperimentConfig& c) {
    const double t1 = quick(c) ? 100.0 : 1e4;
    const double t2 = quick(c) ? 1e4 : 1e6;
    const std::uint64_t n = pick(c, 100000, 2000);
    const auto law = IncrementLaw::gaussian();
    const auto r1 = ratio_delta_over_h(region_point(t1), t1, desk::kRegionEps, law, n, stream(c, 4, 0));
    const auto r2 = ratio_delta_over_h(region_point(t2), t2, desk::kRegionEps, law, n, stream(c, 4, 1));
    const bool floor_ok = r1.mean >= c.tol.ratio_floor && r2.mean >= c.tol.ratio_floor;
    const bool improving = r2.mean > r1.mean;
    return {{"pass", floor_ok && improving},
            {"floor", c.tol.ratio_floor},
            {"ratio_t1", estimate_json(r1)},
            {"t1", t1},
            {"ratio_t2", estimate_json(r2)},
            {"t2", t2},
            {"above_floor", floor_ok},
            {"improving", improving}};
}

json phi_inequality(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 1000000, 10000);
    json cells = json::array();
    bool pass = true;
    std::uint32_t cell = 0;
    for (const auto& law : IncrementLaw::builtin())
        for (int p = 0; p <= 3; ++p)
            for (int q = 0; q <= 3; ++q) {
                const auto e = phi_inequality_check(law, p, q, n, stream(c, 5, cell++));
                const bool ok = e.mean >= -c.tol.inequality_se * e.se;
                pass = pass && ok;
                cells.push_back({{"law", law.name()}, {"p", p}, {"q", q}, {"estimate", estimate_json(e)}, {"pass", ok}});
            }
    return {{"pass", pass}, {"tolerance_se", c.tol.inequality_se}, {"cells", cells}};
}

constexpr double kRepulsionDelta = 0.25;

json repulsion_decay(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 5000);
    const auto x = spaced_point(3, 1.0);
    const std::vector<double> ts{100.0, 400.0};
    const auto est = repulsion_probe(x.coords(), IncrementLaw::gaussian(), ts, kRepulsionDelta, n, stream(c, 6));
    const double gap = est[0].mean - est[1].mean;
    const double se = pooled_se(est[0], est[1]);
    return {{"pass", gap > desk::kRepulsionDecaySe * se},
            {"delta", kRepulsionDelta},
            {"t100", estimate_json(est[0])},
            {"t400", estimate_json(est[1])},
            {"gap", gap},
            {"pooled_se", se}};
}

// ---------------------------------------------------------------------------
// orders

GridDensity bump_density() {
    const auto grid = linspace(-6.0, 10.0, 1601);
    std::vector<double> f;
    for (double x : grid) {
        const double bulk = std::exp(-0.5 * x * x);
        const double z = (x - 6.0) / 0.3;
        f.push_back(0.97 * bulk + 0.03 / 0.3 * std::exp(-0.5 * z * z));
    }
    return GridDensity(grid, f);
}

json lr_entries(const IncrementLaw& law, std::span<const double> thetas, bool& holds, json& witness) {
    const auto grid = linspace(0.0, 24.0, 2048);
    json entries = json::array();
    holds = true;
    for (const auto& e : conditional_tail_lr_check(law, thetas, grid, desk::kLrTolerance)) {
        json j{{"theta", e.theta}, {"side", e.side}, {"skipped", e.skipped}};
        if (!e.skipped) {
            const bool ok = e.result.holds && e.refined.holds;
            j["holds"] = ok;
            j["worst_margin"] = e.result.worst_margin;
            const auto& w = e.result.witness ? e.result.witness : e.refined.witness;
            if (w) {
                j["witness"] = {w->first, w->second};
                if (witness.is_null()) witness = j;
            }
            holds = holds && ok;
        }
        entries.push_back(j);
    }
    return entries;
}

json lr_suite(const ExperimentConfig& c) {
    const std::vector<double> thetas{0.0, 0.5, 1.0, 2.0};
    json laws = json::array();
    bool builtin_hold = true;
    for (const auto& law : IncrementLaw::builtin()) {
        bool holds = false;
        json witness;
        const auto entries = lr_entries(law, thetas, holds, witness);
        builtin_hold = builtin_hold && holds;
        laws.push_back({{"law", law.name()}, {"holds", holds}, {"entries", entries}});
    }
    const IncrementLaw bad = c.counterexample.empty() ? IncrementLaw::custom(bump_density())
                                                      : IncrementLaw::from_name("csv:" + c.counterexample);
    bool bad_holds = true;
    json witness;
    const auto bad_entries = lr_entries(bad, thetas, bad_holds, witness);
    const bool detected = !bad_holds && !witness.is_null();
    return {{"pass", builtin_hold && detected},
            {"builtin_laws", laws},
            {"counterexample",
             {{"source", c.counterexample.empty() ? "built-in bump density" : c.counterexample},
              {"log_concave", bad.log_concave()},
              {"violation_detected", detected},
              {"witness", witness},
              {"entries", bad_entries}}}};
}

// ---------------------------------------------------------------------------
// coupling

json dyson_coupling(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 1000, 50);
    json cells = json::array();
    bool pass = true;
    for (int d : {2, 3}) {
        const WeylPoint z0 = spaced_point(d, 1.0);
        const WeylPoint y0 = spaced_point(d, 2.0);
        const RngStream root = stream(c, 8, static_cast<std::uint32_t>(d));
        std::vector<std::uint64_t> violations(n, 0), halved(n, 0), grid(n, 0);
        std::vector<std::uint8_t> coarse(n, 0), collapsed(n, 0);
        std::vector<double> worst(n, std::numeric_limits<double>::infinity());
        std::vector<std::string> errors(n);
        parallel_for(n, [&](std::size_t r) {
            try {
                const auto p = dyson_sde_coupled(y0, z0, 1.0, c.step, root.replica(r));
                for (Eigen::Index k = 0; k < p.y.values.rows(); ++k)
                    for (Eigen::Index i = 0; i < d; ++i)
                        for (Eigen::Index j = i + 1; j < d; ++j) {
                            const double m = (p.y.values(k, j) - p.y.values(k, i)) - (p.z.values(k, j) - p.z.values(k, i));
                            worst[r] = std::min(worst[r], m);
                            if (m < -c.tol.coupling_slack) ++violations[r];
                        }
                halved[r] = p.halved_steps;
                grid[r] = p.grid_steps;
                coarse[r] = p.step_too_coarse;
            } catch (const FeasibilityError& e) {
                collapsed[r] = 1;
                errors[r] = e.what();
            }
        });
        std::uint64_t v = 0, h = 0, g = 0, nc = 0, nk = 0;
        double w = std::numeric_limits<double>::infinity();
        std::string first_error;
        for (std::size_t r = 0; r < n; ++r) {
            v += violations[r];
            h += halved[r];
            g += grid[r];
            nc += coarse[r];
            nk += collapsed[r];
            w = std::min(w, worst[r]);
            if (collapsed[r] && first_error.empty()) first_error = errors[r];
        }
        const bool ok = v == 0 && nc == 0 && nk == 0;
        pass = pass && ok;
        json cell{{"d", d},
                  {"paths", n},
                  {"step", c.step},
                  {"violations", v},
                  {"halved_steps", h},
                  {"grid_steps", g},
                  {"step_too_coarse", nc},
                  {"collapsed", nk},
                  {"pass", ok}};
        cell["worst_margin"] = std::isfinite(w) ? json(w) : json(nullptr);
        if (!first_error.empty()) cell["first_error"] = first_error;
        cells.push_back(cell);
    }
    return {{"pass", pass}, {"slack", c.tol.coupling_slack}, {"cells", cells}};
}

// ---------------------------------------------------------------------------
// edge-agreement

json smc_vs_rejection(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 10000, 1000);
    const auto law = IncrementLaw::gaussian();
    const std::vector<double> x{0.0, 1.0, 2.0};
    const double horizon = 10.0;
    const auto smc = sample_ordered_smc(x, horizon, law, n, 1.0, stream(c, 9, 0));
    const auto plain = sample_ordered_rejection(WeylPoint(x), horizon, law, n, 10000 * n, stream(c, 9, 1));
    const auto rej = reweighted_by_delta(plain);
    json functionals = json::object();
    bool pass = true;
    for (PathFunctional f : {PathFunctional::top, PathFunctional::bottom, PathFunctional::spread}) {
        WeightedSample a{{}, smc.weights}, b{{}, rej.weights}, u{{}, {}};
        for (std::size_t i = 0; i < smc.size(); ++i) a.values.push_back(evaluate(f, smc.final_positions(i)));
        for (std::size_t i = 0; i < rej.size(); ++i) b.values.push_back(evaluate(f, rej.final_positions(i)));
        u.values = b.values;
        const auto weighted = two_sample_report(a, b);
        const auto unweighted = two_sample_report(a, u);
        const bool ok = weighted.ks <= c.tol.ks_sampler;
        pass = pass && ok;
        functionals[std::string(to_string(f))] = {{"ks", weighted.ks},
                                                  {"mean_gap", weighted.mean_gap},
                                                  {"pooled_se", weighted.pooled_se},
                                                  {"ks_unweighted_rejection", unweighted.ks},
                                                  {"pass", ok}};
    }
    return {{"pass", pass},
            {"tolerance", c.tol.ks_sampler},
            {"n", n},
            {"smc_ess", smc.ess},
            {"rejection_acceptance_rate", plain.acceptance_rate},
            {"rejection_weighted_ess", rej.ess},
            {"functionals", functionals}};
}

json gue_identity(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 5000);
    const int d = 5;
    const auto paths = nibm_matrix_marginals(std::vector<double>(d, 0.0), std::vector<double>{1.0}, n, stream(c, 10, 0));
    const auto gue = gue_max_eigenvalue_samples(d, n, stream(c, 10, 1));
    WeightedSample top, oracle{gue, {}};
    Accumulator trace;
    for (const auto& p : paths) {
        top.values.push_back(p.values(0, d - 1));
        trace.add(p.values.row(0).squaredNorm());
    }
    const auto report = two_sample_report(top, oracle);
    const auto tr = trace.estimate();
    const double expected = static_cast<double>(d * d);
    const bool ks_ok = report.ks <= c.tol.ks_exact;
    const bool trace_ok = std::abs(tr.mean - expected) <= c.tol.inequality_se * tr.se;
    return {{"pass", ks_ok && trace_ok},
            {"ks", report.ks},
            {"tolerance", c.tol.ks_exact},
            {"trace_square", estimate_json(tr)},
            {"trace_expected", expected},
            {"ks_pass", ks_ok},
            {"trace_pass", trace_ok}};
}

json edge_side(const WeightedSample& s) { return {{"mean", s.mean()}, {"se", s.se()}, {"ess", s.ess()}}; }

/// Walk (SMC) vs NIBM top-particle statistic from matched starts.
json edge_comparison(const ExperimentConfig& c, std::uint64_t n, double resample_every, std::uint32_t cell) {
    const int d = 4;
    const double T = quick(c) ? 100.0 : 2500.0;
    const double a = default_edge_exponent(d, T);
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> times{T};
    SmcOptions opts;
    opts.record_times = times;
    const auto walk = sample_ordered_smc(x, T, IncrementLaw::gaussian(), n, resample_every, stream(c, 11, cell), opts);
    const WeightedSample ws{top_particle_statistic(SnapshotSet::from(walk), T, a), walk.weights};
    const auto nibm = nibm_matrix_marginals(x, times, n, stream(c, 11, cell + 1));
    const WeightedSample bs{top_particle_statistic(SnapshotSet::from(nibm), T, a), {}};
    const auto report = two_sample_report(ws, bs);
    const bool ess_ok = ws.ess() >= c.tol.min_ess && bs.ess() >= c.tol.min_ess;
    return {{"pass", report.ks <= c.tol.ks_agreement && ess_ok},
            {"d", d},
            {"T", T},
            {"a", a},
            {"n", n},
            {"resample_every", resample_every},
            {"ks", report.ks},
            {"walk", edge_side(ws)},
            {"nibm", edge_side(bs)},
            {"ess_pass", ess_ok},
            {"resamplings", walk.resample_times.size()}};
}

json edge_agreement(const ExperimentConfig& c) {
    const std::uint64_t n = pick(c, 100000, 2000);
    const double every = quick(c) ? 1.0 : 100.0;
    json entry;
    try {
        entry = edge_comparison(c, n, every, 0);
    } catch (const FeasibilityError& e) {
        entry = {{"pass", false}, {"n", n}, {"resample_every", every}, {"error", e.what()}};
        // Not part of the verdict: the same comparison on a feasible checkpoint grid.
        try {
            entry["diagnostic_resample_every_1"] = edge_comparison(c, pick(c, 20000, 1000), 1.0, 2);
        } catch (const std::exception& inner) {
            entry["diagnostic_resample_every_1"] = {{"error", inner.what()}};
        }
    }
    entry["tolerance"] = c.tol.ks_agreement;
    entry["min_ess"] = c.tol.min_ess;
    return entry;
}

// ---------------------------------------------------------------------------
// linstat-agreement

json linear_statistics(const ExperimentConfig& c) {
    const int d = 3;
    const double T = quick(c) ? 100.0 : 400.0;
    const double a = default_edge_exponent(d, T);
    const std::uint64_t n = pick(c, 20000, 2000);
    const std::vector<double> x{0.0, 1.0, 2.0};
    const auto spec = LinearStatisticSpec::final_square();
    const auto times = spec.source_times(T);
    SmcOptions opts;
    opts.record_times = times;
    const auto walk = sample_ordered_smc(x, T, IncrementLaw::gaussian(), n, 1.0, stream(c, 12, 0), opts);
    const auto nibm = nibm_matrix_marginals(x, times, n, stream(c, 12, 1));
    auto per_d = [d](std::vector<double> v) {
        for (double& y : v) y /= d;
        return v;
    };
    const WeightedSample ws{per_d(linear_statistic(SnapshotSet::from(walk), spec, T, a)), walk.weights};
    const WeightedSample bs{per_d(linear_statistic(SnapshotSet::from(nibm), spec, T, a)), {}};
    const auto means = two_sample_report(ws, bs);
    const bool mean_ok = std::abs(means.mean_gap) <= c.tol.inequality_se * means.pooled_se;

    const WeightedSample wc{centered_statistic_samples({linear_statistic(SnapshotSet::from(walk), spec, T, a), walk.weights},
                                                       GMap::identity_clipped),
                            walk.weights};
    const WeightedSample bc{
        centered_statistic_samples({linear_statistic(SnapshotSet::from(nibm), spec, T, a), {}}, GMap::identity_clipped),
        {}};
    const auto centered = two_sample_report(wc, bc);
    const bool centered_ok = centered.ks <= c.tol.ks_agreement;

    // E tr H(T)^2 = Σ x_j^2 + d^2 T, so E[Y_T(f)] / d = (Σ x_j^2 + d^2 T) T^(-1-a) / d.
    double sum_sq = 0.0;
    for (double v : x) sum_sq += v * v;
    const double identity = (sum_sq + d * d * T) * std::pow(T, -1.0 - a) / d;
    const bool identity_ok = std::abs(bs.mean() - identity) <= c.tol.inequality_se * bs.se();
    return {{"pass", mean_ok && centered_ok && identity_ok},
            {"d", d},
            {"T", T},
            {"a", a},
            {"n", n},
            {"walk", edge_side(ws)},
            {"nibm", edge_side(bs)},
            {"mean_gap", means.mean_gap},
            {"pooled_se", means.pooled_se},
            {"mean_pass", mean_ok},
            {"centered_ks", centered.ks},
            {"centered_pass", centered_ok},
            {"trace_identity", identity},
            {"trace_identity_pass", identity_ok}};
}

}  // namespace

json run_suite(Suite suite, const ExperimentConfig& c) {
    require(c.seed.has_value(), "suite: --seed is mandatory");
    json criteria = json::array();
    switch (suite) {
        case Suite::inequalities:
            criteria.push_back(criterion("harmonicity of Δ", [&] { return harmonicity(c); }));
            criteria.push_back(criterion("superharmonicity of h", [&] { return superharmonicity(c); }));
            criteria.push_back(criterion("V <= h and Δ <= h", [&] { return v_and_delta_below_h(c); }));
            criteria.push_back(criterion("V ~ Δ on W_{t,eps}", [&] { return v_sim_delta(c); }));
            criteria.push_back(criterion("Δ/h ratio", [&] { return delta_over_h(c); }));
            criteria.push_back(criterion("phi inequality", [&] { return phi_inequality(c); }));
            criteria.push_back(criterion("repulsion decay", [&] { return repulsion_decay(c); }));
            break;
        case Suite::orders:
            criteria.push_back(criterion("likelihood-ratio order suite", [&] { return lr_suite(c); }));
            break;
        case Suite::coupling:
            criteria.push_back(criterion("Dyson monotone coupling", [&] { return dyson_coupling(c); }));
            break;
        case Suite::edge_agreement:
            criteria.push_back(criterion("SMC vs Δ-reweighted rejection", [&] { return smc_vs_rejection(c); }));
            criteria.push_back(criterion("GUE identity of NIBM", [&] { return gue_identity(c); }));
            criteria.push_back(criterion("edge agreement walk vs NIBM", [&] { return edge_agreement(c); }));
            break;
        case Suite::linstat_agreement:
            criteria.push_back(criterion("linear statistics walk vs NIBM", [&] { return linear_statistics(c); }));
            break;
    }
    bool pass = true;
    for (const auto& e : criteria) pass = pass && e.at("pass").get<bool>();
    return {{"suite", to_string(suite)},
            {"scale", quick(c) ? "quick" : "desk"},
            {"seed", *c.seed},
            {"pass", pass},
            {"criteria", criteria}};
}

}  // namespace owl::cli
