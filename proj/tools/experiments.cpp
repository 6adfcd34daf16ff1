#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>

#include "io.hpp"
#include "owl/errors.hpp"
#include "owl/harmonic.hpp"
#include "owl/parallel.hpp"
#include "owl/tolerances.hpp"
#include "runner.hpp"

namespace owl::cli {
namespace {

constexpr std::uint64_t kPathDumpWarning = 100;

struct Context {
    const ExperimentConfig& c;
    IncrementLaw law;
    RngStream root;
    RunOutput out;
    std::string name;
};

void emit(const nlohmann::json& j) { std::cout << j.dump() << '\n'; }

nlohmann::json ensemble_summary(const WeightedEnsembleSet& set) {
    return {{"method", to_string(set.method)},
            {"n", set.size()},
            {"ess", set.ess},
            {"acceptance_rate", set.acceptance_rate},
            {"attempts", set.attempts},
            {"log_normalizer", set.log_normalizer},
            {"resample_times", set.resample_times},
            {"record_times", set.record_times},
            {"warnings", set.warnings}};
}

/// Runs `estimate` inside a shard scope and logs a mergeable record.
template <class F>
nlohmann::json logged_mergeable(Context& ctx, std::string_view op, double scale, const nlohmann::json& extra,
                                F&& estimate) {
    ShardScope shard(ctx.c.replica_offset);
    const MCEstimate e = estimate();
    return ctx.out.log(op, e, extra, &shard, scale);
}

void dump_paths(Context& ctx, const std::vector<PathEnsemble>& paths) {
    if (paths.size() > kPathDumpWarning)
        std::cerr << "warning: writing " << paths.size() << " path CSVs; each holds every jump of every walker\n";
    const auto dir = ctx.out.file("paths");
    std::filesystem::create_directories(dir);
    for (std::size_t r = 0; r < paths.size(); ++r)
        write_path_csv(paths[r], (dir / ("replica_" + std::to_string(r) + ".csv")).string());
}

void free_sim(Context& ctx) {
    const auto x = start_vector(ctx.c);
    const int d = static_cast<int>(x.size());
    std::vector<std::optional<PathEnsemble>> slots(ctx.c.n);
    parallel_for(slots.size(), [&](std::size_t r) {
        slots[r] = simulate_free(d, x, ctx.c.horizon, ctx.law, ctx.root.replica(r));
    });
    std::vector<PathEnsemble> paths;
    paths.reserve(slots.size());
    for (auto& p : slots) paths.push_back(std::move(*p));
    CsvWriter csv(ctx.out.file("free-sim.csv"), kEnsembleColumns);
    Accumulator survival;
    const double w = 1.0 / static_cast<double>(paths.size());
    for (std::size_t r = 0; r < paths.size(); ++r) {
        const auto end = paths[r].positions_at(ctx.c.horizon);
        const bool alive = !exit_time(paths[r]).reached();
        survival.add(alive ? 1.0 : 0.0);
        csv.row(r, {w, *std::max_element(end.begin(), end.end()), *std::min_element(end.begin(), end.end()),
                    alive ? 1.0 : 0.0});
    }
    MCEstimate e = survival.estimate(ctx.root.fingerprint());
    e.horizon = ctx.c.horizon;
    const auto rec = ctx.out.log("free-sim.survival", e);
    ctx.out.sidecar("free-sim", kEnsembleColumns, {{"survival", rec}});
    if (ctx.c.dump_paths) dump_paths(ctx, paths);
    emit(rec);
}

void estimate_v(Context& ctx) {
    const WeylPoint x = start_point(ctx.c);
    const double scale = vandermonde(x.coords()).to_real();
    const bool survival = ctx.c.v_method == "survival";
    const auto rec = logged_mergeable(ctx, survival ? "estimate-v.survival" : "estimate-v.stopped", scale, {}, [&] {
        return survival ? estimate_V_survival(x, ctx.c.horizon, ctx.law, ctx.c.n, ctx.root)
                        : estimate_V_stopped(x, ctx.c.horizon, ctx.law, ctx.c.n, ctx.root);
    });
    ctx.out.result("estimate-v", {{"V", rec}, {"delta", scale}});
    emit(rec);
}

void estimate_h_exp(Context& ctx) {
    const WeylPoint x = start_point(ctx.c);
    const auto rec = logged_mergeable(ctx, "estimate-h", vandermonde(x.coords()).to_real(), {},
                                      [&] { return estimate_h(x, ctx.law, ctx.c.n, ctx.root); });
    ctx.out.result("estimate-h", {{"h", rec}});
    emit(rec);
}

void superharmonic(Context& ctx) {
    const WeylPoint x = start_point(ctx.c);
    const auto rec = logged_mergeable(ctx, "superharmonic", vandermonde(x.coords()).to_real(), {},
                                      [&] { return superharmonic_deficit(x, ctx.c.horizon, ctx.law, ctx.c.n, ctx.root); });
    ctx.out.result("superharmonic", {{"deficit", rec}});
    emit(rec);
}

void ratio_vdelta(Context& ctx) {
    const WeylPoint x = start_point(ctx.c);
    const auto rec = logged_mergeable(ctx, "ratio-vdelta", 1.0, {}, [&] {
        return ratio_V_over_delta(x, ctx.c.T, ctx.c.eps, ctx.law, ctx.c.n, ctx.root);
    });
    ctx.out.result("ratio-vdelta", {{"ratio", rec}});
    emit(rec);
}

void ratio_deltah(Context& ctx) {
    const WeylPoint x = start_point(ctx.c);
    const auto e = ratio_delta_over_h(x, ctx.c.T, ctx.c.eps, ctx.law, ctx.c.n, ctx.root);
    const auto rec = ctx.out.log("ratio-deltah", e);
    ctx.out.result("ratio-deltah", {{"ratio", rec}});
    emit(rec);
}

nlohmann::json lr_json(const LrOrderResult& r) {
    nlohmann::json j{{"holds", r.holds}, {"worst_margin", r.worst_margin}};
    j["witness"] = r.witness ? nlohmann::json{r.witness->first, r.witness->second} : nlohmann::json(nullptr);
    return j;
}

void lr_check(Context& ctx) {
    const auto grid = linspace(0.0, 24.0, 2048);
    const auto report = conditional_tail_lr_check(ctx.law, ctx.c.thetas, grid, desk::kLrTolerance);
    nlohmann::json entries = nlohmann::json::array();
    bool holds = true;
    for (const auto& e : report) {
        entries.push_back({{"theta", e.theta},
                           {"side", e.side},
                           {"skipped", e.skipped},
                           {"note", e.note},
                           {"result", lr_json(e.result)},
                           {"refined", lr_json(e.refined)}});
        if (!e.skipped) holds = holds && e.result.holds && e.refined.holds;
    }
    const nlohmann::json summary{{"law", ctx.law.name()}, {"log_concave", ctx.law.log_concave()}, {"holds", holds},
                                 {"entries", entries}};
    ctx.out.result("lr-check", summary);
    emit(summary);
}

void zeta_check(Context& ctx) {
    std::vector<double> draws(ctx.c.n);
    parallel_for(draws.size(), [&](std::size_t r) {
        RngStream s = ctx.root.replica(r).lane(lanes::kZeta);
        draws[r] = sample_zeta(ctx.law, s);
    });
    const double min_draw = *std::min_element(draws.begin(), draws.end());
    Accumulator acc;
    for (double z : draws) acc.add(z);
    const auto [m_pos, m_neg] = conditional_means(ctx.law);
    const double expected = m_pos - m_neg + 1.0;
    const double hi = std::max(16.0, 4.0 * expected);
    const auto density = zeta_density(ctx.law, linspace(1.0, hi, 2048));
    write_statistic_csv(draws, {}, ctx.out.file("zeta-check.csv"));
    const auto rec = ctx.out.log("zeta-check.mean", acc.estimate(ctx.root.fingerprint()));
    const nlohmann::json summary{{"min_draw", min_draw},
                                 {"all_at_least_one", min_draw >= 1.0},
                                 {"mean", rec},
                                 {"quadrature_mean", expected},
                                 {"density_mass", density.integral()},
                                 {"density_log_concave", density.is_log_concave()}};
    ctx.out.sidecar("zeta-check", kStatisticColumns, summary);
    emit(summary);
}

void phi_check(Context& ctx) {
    std::vector<std::pair<int, int>> grid;
    if (ctx.c.p || ctx.c.q) {
        grid.emplace_back(ctx.c.p.value_or(0), ctx.c.q.value_or(0));
    } else {
        for (int p = 0; p <= 3; ++p)
            for (int q = 0; q <= 3; ++q) grid.emplace_back(p, q);
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& [p, q] : grid) {
        const auto rec = logged_mergeable(ctx, "phi-check", 1.0, {{"p", p}, {"q", q}},
                                          [&] { return phi_inequality_check(ctx.law, p, q, ctx.c.n, ctx.root); });
        records.push_back(rec);
        emit(rec);
    }
    ctx.out.result("phi-check", {{"estimates", records}});
}

void ordered_rejection(Context& ctx) {
    RejectionOptions opts{ctx.c.times, ctx.c.dump_paths};
    const std::uint64_t cap = ctx.c.max_attempts ? ctx.c.max_attempts : 1000 * ctx.c.n;
    const auto set = sample_ordered_rejection(start_point(ctx.c), ctx.c.horizon, ctx.law, ctx.c.n, cap, ctx.root, opts);
    write_ensemble_csv(set, ctx.out.file("ordered-rejection.csv"));
    const auto summary = ensemble_summary(set);
    ctx.out.sidecar("ordered-rejection", kEnsembleColumns, summary);
    if (ctx.c.dump_paths) dump_paths(ctx, set.paths);
    emit(summary);
}

SmcOptions smc_options(const ExperimentConfig& c, std::span<const double> record_times) {
    SmcOptions o;
    o.record_times.assign(record_times.begin(), record_times.end());
    o.ess_fraction = c.ess_fraction;
    o.weight = c.weight == "h" ? WeightKind::h : WeightKind::delta;
    o.perturb_packed = c.perturb;
    return o;
}

void ordered_smc(Context& ctx) {
    const auto set = sample_ordered_smc(start_vector(ctx.c), ctx.c.horizon, ctx.law, ctx.c.n, ctx.c.resample_every,
                                        ctx.root, smc_options(ctx.c, ctx.c.times));
    write_ensemble_csv(set, ctx.out.file("ordered-smc.csv"));
    auto summary = ensemble_summary(set);
    for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
    ctx.out.sidecar("ordered-smc", kEnsembleColumns, summary);
    emit(summary);
}

void nibm(Context& ctx) {
    const std::vector<double> times = ctx.c.times.empty() ? std::vector<double>{ctx.c.horizon} : ctx.c.times;
    const auto paths = nibm_matrix_marginals(start_vector(ctx.c), times, ctx.c.n, ctx.root);
    write_eigen_csv(paths, ctx.out.file("nibm.csv"));
    Accumulator trace;
    for (const auto& p : paths) trace.add(p.values.row(p.values.rows() - 1).squaredNorm());
    MCEstimate e = trace.estimate(ctx.root.fingerprint());
    e.horizon = times.back();
    const auto rec = ctx.out.log("nibm.trace_square", e);
    ctx.out.sidecar("nibm", kEigenColumns, {{"trace_square", rec}, {"times", times}});
    emit(rec);
}

void coupling(Context& ctx) {
    const WeylPoint z0 = start_point(ctx.c);
    std::vector<double> y(z0.coords().begin(), z0.coords().end());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += static_cast<double>(j) * ctx.c.gap;
    const WeylPoint y0(y);
    struct Outcome {
        std::uint64_t violations = 0;
        double worst_margin = 0.0;
        std::uint64_t halved = 0, grid = 0, clamped = 0;
        bool coarse = false;
        bool collapsed = false;
        std::string error;
    };
    std::vector<Outcome> outcomes(ctx.c.n);
    std::vector<CoupledPaths> kept(ctx.c.dump_paths ? ctx.c.n : 0);
    const double slack = ctx.c.tol.coupling_slack;
    parallel_for(outcomes.size(), [&](std::size_t r) {
        Outcome& o = outcomes[r];
        try {
            const auto c = dyson_sde_coupled(y0, z0, ctx.c.horizon, ctx.c.step, ctx.root.replica(r));
            o.worst_margin = std::numeric_limits<double>::infinity();
            for (Eigen::Index k = 0; k < c.y.values.rows(); ++k)
                for (Eigen::Index i = 0; i < c.y.values.cols(); ++i)
                    for (Eigen::Index j = i + 1; j < c.y.values.cols(); ++j) {
                        const double margin = (c.y.values(k, j) - c.y.values(k, i)) - (c.z.values(k, j) - c.z.values(k, i));
                        o.worst_margin = std::min(o.worst_margin, margin);
                        if (margin < -slack) ++o.violations;
                    }
            o.halved = c.halved_steps;
            o.grid = c.grid_steps;
            o.clamped = c.clamped_drifts;
            o.coarse = c.step_too_coarse;
            if (!kept.empty()) kept[r] = c;
        } catch (const FeasibilityError& e) {
            o.collapsed = true;
            o.error = e.what();
        }
    });
    std::uint64_t violations = 0, halved = 0, grid = 0, clamped = 0, coarse = 0, collapsed = 0;
    double worst = std::numeric_limits<double>::infinity();
    std::string first_error;
    for (const auto& o : outcomes) {
        violations += o.violations;
        halved += o.halved;
        grid += o.grid;
        clamped += o.clamped;
        coarse += o.coarse ? 1 : 0;
        if (o.collapsed) {
            ++collapsed;
            if (first_error.empty()) first_error = o.error;
        } else {
            worst = std::min(worst, o.worst_margin);
        }
    }
    nlohmann::json summary{{"paths", ctx.c.n},
                           {"y0", y},
                           {"z0", std::vector<double>(z0.coords().begin(), z0.coords().end())},
                           {"violations", violations},
                           {"halved_steps", halved},
                           {"grid_steps", grid},
                           {"clamped_drifts", clamped},
                           {"step_too_coarse", coarse},
                           {"collapsed", collapsed}};
    summary["worst_margin"] = std::isfinite(worst) ? nlohmann::json(worst) : nlohmann::json(nullptr);
    if (!first_error.empty()) summary["first_error"] = first_error;
    if (!kept.empty()) {
        std::vector<EigenPath> ys, zs;
        for (const auto& c : kept) {
            ys.push_back(c.y);
            zs.push_back(c.z);
        }
        write_eigen_csv(ys, ctx.out.file("coupling-y.csv"));
        write_eigen_csv(zs, ctx.out.file("coupling-z.csv"));
        ctx.out.sidecar("coupling-y", kEigenColumns, summary);
        ctx.out.sidecar("coupling-z", kEigenColumns, summary);
    }
    ctx.out.result("coupling", summary);
    emit(summary);
    if (collapsed > 0)
        throw FeasibilityError("coupling: " + std::to_string(collapsed) + " of " + std::to_string(ctx.c.n) +
                               " replicas collapsed (" + first_error + ")");
}

void edge(Context& ctx) {
    const double a = edge_exponent(ctx.c);
    const auto grid = edge_grid(ctx.c.L, ctx.c.grid);
    const auto times = edge_source_times(ctx.c.T, a, grid);
    nlohmann::json diag;
    const auto set = sample_source(ctx.c, ctx.c.source, ctx.law, times, ctx.root, diag);
    const auto lines = edge_rescale_all(set, ctx.c.T, a, ctx.c.k, ctx.c.L, ctx.c.grid);
    write_edge_csv(lines, ctx.out.file("edge.csv"));
    const nlohmann::json summary{{"a", a}, {"time_grid", grid}, {"source_times", times}, {"source", diag}};
    ctx.out.sidecar("edge", kEdgeColumns, summary);
    if (!set.weights.empty()) write_statistic_csv(top_particle_statistic(set, ctx.c.T, a), set.weights,
                                                  ctx.out.file("edge-weights.csv"));
    emit(summary);
}

void top_stat(Context& ctx) {
    const double a = edge_exponent(ctx.c);
    const std::vector<double> times{ctx.c.T};
    nlohmann::json diag;
    const auto set = sample_source(ctx.c, ctx.c.source, ctx.law, times, ctx.root, diag);
    const WeightedSample s{top_particle_statistic(set, ctx.c.T, a), set.weights};
    write_statistic_csv(s.values, s.weights, ctx.out.file("top-stat.csv"));
    const nlohmann::json summary{{"a", a}, {"mean", s.mean()}, {"se", s.se()}, {"ess", s.ess()}, {"source", diag}};
    ctx.out.sidecar("top-stat", kStatisticColumns, summary);
    emit(summary);
}

void linstat(Context& ctx) {
    const double a = edge_exponent(ctx.c);
    const auto spec = LinearStatisticSpec::final_square(ctx.c.stat_delta);
    const auto times = spec.source_times(ctx.c.T);
    nlohmann::json diag;
    const auto set = sample_source(ctx.c, ctx.c.source, ctx.law, times, ctx.root, diag);
    auto values = linear_statistic(set, spec, ctx.c.T, a);
    for (double& v : values) v /= static_cast<double>(set.d);
    const WeightedSample s{values, set.weights};
    const GMap g = g_map_from_name(ctx.c.g);
    const auto centered = centered_statistic_samples(s, g);
    write_statistic_csv(s.values, s.weights, ctx.out.file("linstat.csv"));
    write_statistic_csv(centered, s.weights, ctx.out.file("linstat-centered.csv"));
    const nlohmann::json summary{{"a", a},        {"f", "w(1)^2"},    {"normalization", "X_T(f) / d"},
                                 {"mean", s.mean()}, {"se", s.se()}, {"ess", s.ess()},
                                 {"g", to_string(g)}, {"source", diag}};
    ctx.out.sidecar("linstat", kStatisticColumns, summary);
    ctx.out.sidecar("linstat-centered", kStatisticColumns, summary);
    emit(summary);
}

void compare(Context& ctx) {
    const auto a = read_statistic_csv(ctx.c.inputs[0]);
    const auto b = read_statistic_csv(ctx.c.inputs[1]);
    const auto report = two_sample_report(a, b);
    nlohmann::json summary = to_json(report);
    summary["inputs"] = ctx.c.inputs;
    ctx.out.result("compare", summary);
    emit(summary);
}

void repulsion(Context& ctx) {
    const std::vector<double> ts = ctx.c.times.empty() ? std::vector<double>{100.0, 400.0} : ctx.c.times;
    const auto estimates = repulsion_probe(start_vector(ctx.c), ctx.law, ts, ctx.c.delta, ctx.c.n, ctx.root);
    nlohmann::json records = nlohmann::json::array();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto rec = ctx.out.log("repulsion-probe", estimates[k], {{"t", ts[k]}});
        records.push_back(rec);
        emit(rec);
    }
    ctx.out.result("repulsion-probe", {{"estimates", records}});
}

void moment_probe(Context& ctx) {
    const auto e = moment_bound_probe(start_point(ctx.c), ctx.c.horizon, ctx.c.power, ctx.law, ctx.c.n, ctx.root);
    const auto rec = ctx.out.log("moment-probe", e);
    ctx.out.result("moment-probe", {{"statistic", rec}});
    emit(rec);
}

}  // namespace

std::uint32_t stream_id(Experiment e) { return static_cast<std::uint32_t>(e) + 1; }

std::vector<double> start_vector(const ExperimentConfig& c) {
    if (!c.start.empty()) return c.start;
    const auto p = spaced_point(c.d, c.spacing);
    return {p.coords().begin(), p.coords().end()};
}

WeylPoint start_point(const ExperimentConfig& c) { return WeylPoint(start_vector(c)); }

double edge_exponent(const ExperimentConfig& c) { return c.a ? *c.a : default_edge_exponent(c.d, c.T); }

SnapshotSet sample_source(const ExperimentConfig& c, std::string_view source, const IncrementLaw& law,
                          std::span<const double> times, const RngStream& root, nlohmann::json& diag) {
    require(!times.empty(), "sampling source: no snapshot times");
    const double horizon = times.back();
    const auto x = start_vector(c);
    diag["kind"] = source;
    if (source == "nibm") return SnapshotSet::from(nibm_matrix_marginals(x, times, c.n, root));
    if (source == "smc") {
        const auto set = sample_ordered_smc(x, horizon, law, c.n, c.resample_every, root, smc_options(c, times));
        diag.update(ensemble_summary(set));
        for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
        return SnapshotSet::from(set);
    }
    RejectionOptions opts{{times.begin(), times.end()}, false};
    const std::uint64_t cap = c.max_attempts ? c.max_attempts : 1000 * c.n;
    const auto set = sample_ordered_rejection(WeylPoint(x), horizon, law, c.n, cap, root, opts);
    diag.update(ensemble_summary(set));
    return SnapshotSet::from(set);
}

void run_experiment(const ExperimentConfig& c) {
    const Experiment e = *c.experiment;
    const RngStream root(*c.seed, {stream_id(e), 0, 0});
    Context ctx{c, IncrementLaw::from_name(c.law), root, RunOutput(c.out, c.params(), root.fingerprint()),
                std::string(to_string(e))};
    switch (e) {
        case Experiment::free_sim: return free_sim(ctx);
        case Experiment::estimate_v: return estimate_v(ctx);
        case Experiment::estimate_h: return estimate_h_exp(ctx);
        case Experiment::superharmonic: return superharmonic(ctx);
        case Experiment::ratio_vdelta: return ratio_vdelta(ctx);
        case Experiment::ratio_deltah: return ratio_deltah(ctx);
        case Experiment::lr_check: return lr_check(ctx);
        case Experiment::zeta_check: return zeta_check(ctx);
        case Experiment::phi_check: return phi_check(ctx);
        case Experiment::ordered_rejection: return ordered_rejection(ctx);
        case Experiment::ordered_smc: return ordered_smc(ctx);
        case Experiment::nibm: return nibm(ctx);
        case Experiment::coupling: return coupling(ctx);
        case Experiment::edge: return edge(ctx);
        case Experiment::top_stat: return top_stat(ctx);
        case Experiment::linstat: return linstat(ctx);
        case Experiment::compare: return compare(ctx);
        case Experiment::repulsion_probe: return repulsion(ctx);
        case Experiment::moment_probe: return moment_probe(ctx);
    }
}

}  // namespace owl::cli
