#include <array>
#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "owl/cli.hpp"
#include "owl/errors.hpp"
#include "owl/increments.hpp"
#include "owl/parallel.hpp"

namespace owl::cli {
namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 19> kExperimentNames{{
    {Experiment::free_sim, "free-sim"},
    {Experiment::estimate_v, "estimate-v"},
    {Experiment::estimate_h, "estimate-h"},
    {Experiment::superharmonic, "superharmonic"},
    {Experiment::ratio_vdelta, "ratio-vdelta"},
    {Experiment::ratio_deltah, "ratio-deltah"},
    {Experiment::lr_check, "lr-check"},
    {Experiment::zeta_check, "zeta-check"},
    {Experiment::phi_check, "phi-check"},
    {Experiment::ordered_rejection, "ordered-rejection"},
    {Experiment::ordered_smc, "ordered-smc"},
    {Experiment::nibm, "nibm"},
    {Experiment::coupling, "coupling"},
    {Experiment::edge, "edge"},
    {Experiment::top_stat, "top-stat"},
    {Experiment::linstat, "linstat"},
    {Experiment::compare, "compare"},
    {Experiment::repulsion_probe, "repulsion-probe"},
    {Experiment::moment_probe, "moment-probe"},
}};

constexpr std::array<std::pair<Suite, std::string_view>, 5> kSuiteNames{{
    {Suite::inequalities, "inequalities"},
    {Suite::orders, "orders"},
    {Suite::coupling, "coupling"},
    {Suite::edge_agreement, "edge-agreement"},
    {Suite::linstat_agreement, "linstat-agreement"},
}};

std::string joined_names(const auto& table) {
    std::string s;
    for (const auto& [value, name] : table) s += (s.empty() ? "" : ", ") + std::string(name);
    return s;
}

/// String-valued options converted after parsing.
struct RawOptions {
    std::string experiment;
    std::string suite;
    std::string scale = "desk";
    std::optional<double> a;
    std::optional<std::uint64_t> seed;
    std::optional<int> p;
    std::optional<int> q;
    std::string out;
};

void build_app(CLI::App& app, ExperimentConfig& c, RawOptions& raw) {
    app.set_config("--config", "", "flat key=value file; command-line flags override it");
    app.add_option("--experiment", raw.experiment, "experiment: " + joined_names(kExperimentNames));
    app.add_option("--suite", raw.suite, "acceptance suite: " + joined_names(kSuiteNames));
    app.add_flag("--merge", c.merge, "pool the run logs given with --input");
    app.add_option("--law", c.law, "gaussian, centered-exponential, laplace, uniform or csv:<path>");
    app.add_option("--d", c.d, "number of walkers");
    app.add_option("--start", c.start, "explicit start, comma separated")->delimiter(',');
    app.add_option("--spacing", c.spacing, "start spacing when --start is not given");
    app.add_option("--T", c.T, "time scale T");
    app.add_option("--a", raw.a, "exponent a; default log d / log T");
    app.add_option("--horizon", c.horizon, "simulation horizon");
    app.add_option("--times", c.times, "record times, time grid or t values, comma separated")->delimiter(',');
    app.add_option("--n", c.n, "replicas, particles or accepted samples");
    app.add_option("--seed", raw.seed, "RNG seed (mandatory)");
    app.add_option("--replica-offset", c.replica_offset, "first replica index of a shard");
    app.add_option("--out", raw.out, "output directory");
    app.add_option("--threads", c.threads, "worker threads")->envname("OWL_THREADS");
    app.add_option("--eps", c.eps, "region exponent eps of W_{T,eps}");
    app.add_option("--p", raw.p, "phi-check exponent p");
    app.add_option("--q", raw.q, "phi-check exponent q");
    app.add_option("--power", c.power, "moment-probe exponent");
    app.add_option("--v-method", c.v_method, "estimate-v method: survival or stopped");
    app.add_option("--delta", c.delta, "repulsion-probe delta");
    app.add_option("--theta", c.theta, "start-sensitivity radius");
    app.add_option("--thetas", c.thetas, "lr-check thresholds, comma separated")->delimiter(',');
    app.add_option("--step", c.step, "coupled SDE grid step");
    app.add_option("--gap", c.gap, "extra spacing of the dominating coupled system");
    app.add_option("--resample-every", c.resample_every, "SMC checkpoint spacing");
    app.add_option("--ess-fraction", c.ess_fraction, "SMC resampling threshold as a fraction of n");
    app.add_option("--weight", c.weight, "SMC potential: delta or h");
    app.add_option("--max-attempts", c.max_attempts, "rejection attempt cap; default 1000 n");
    app.add_flag("!--no-perturb", c.perturb, "reject packed SMC starts instead of spreading them");
    app.add_flag("--dump-paths", c.dump_paths, "write per-replica path CSVs (large)");
    app.add_option("--source", c.source, "walk-side source: nibm, smc or rejection");
    app.add_option("--k", c.k, "edge lines");
    app.add_option("--L", c.L, "edge window half-width");
    app.add_option("--grid", c.grid, "edge grid points");
    app.add_option("--stat-delta", c.stat_delta, "linear statistic delta");
    app.add_option("--g", c.g, "centering map: identity-clipped, tanh or smooth-indicator");
    app.add_option("--input", c.inputs, "input files for compare and merge");
    app.add_option("--counterexample", c.counterexample, "density CSV expected to fail the lr check");
    app.add_option("--scale", raw.scale, "suite scale: desk or quick");
    app.add_option("--tol-inequality-se", c.tol.inequality_se, "one-sided band in SE");
    app.add_option("--tol-agreement-se", c.tol.agreement_se, "two-sided band in SE");
    app.add_option("--tol-ratio-floor", c.tol.ratio_floor, "floor for V/Δ and Δ/h");
    app.add_option("--tol-coupling-slack", c.tol.coupling_slack, "spacing-domination slack");
    app.add_option("--tol-ks-exact", c.tol.ks_exact, "KS bound for exact identities");
    app.add_option("--tol-ks-sampler", c.tol.ks_sampler, "KS bound between samplers");
    app.add_option("--tol-ks-agreement", c.tol.ks_agreement, "KS bound walk vs NIBM");
    app.add_option("--tol-min-ess", c.tol.min_ess, "minimum effective samples per side");
}

void finish(ExperimentConfig& c, const RawOptions& raw) {
    if (!raw.experiment.empty()) c.experiment = experiment_from_name(raw.experiment);
    if (!raw.suite.empty()) c.suite = suite_from_name(raw.suite);
    require(raw.scale == "desk" || raw.scale == "quick", "--scale must be desk or quick, got " + raw.scale);
    c.scale = raw.scale == "quick" ? Scale::quick : Scale::desk;
    c.a = raw.a;
    c.seed = raw.seed;
    c.p = raw.p;
    c.q = raw.q;
    if (!raw.out.empty()) c.out = raw.out;
    if (!c.start.empty()) c.d = static_cast<int>(c.start.size());
}

}  // namespace

std::string_view to_string(Experiment e) {
    for (const auto& [value, name] : kExperimentNames)
        if (value == e) return name;
    return "unknown";
}

Experiment experiment_from_name(std::string_view name) {
    for (const auto& [value, n] : kExperimentNames)
        if (n == name) return value;
    throw PreconditionError("unknown experiment '" + std::string(name) + "'; expected one of " +
                            joined_names(kExperimentNames));
}

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> all = [] {
        std::vector<Experiment> v;
        for (const auto& entry : kExperimentNames) v.push_back(entry.first);
        return v;
    }();
    return all;
}

std::string_view to_string(Suite s) {
    for (const auto& [value, name] : kSuiteNames)
        if (value == s) return name;
    return "unknown";
}

Suite suite_from_name(std::string_view name) {
    for (const auto& [value, n] : kSuiteNames)
        if (n == name) return value;
    throw PreconditionError("unknown suite '" + std::string(name) + "'; expected one of " + joined_names(kSuiteNames));
}

const std::vector<Suite>& all_suites() {
    static const std::vector<Suite> all = [] {
        std::vector<Suite> v;
        for (const auto& entry : kSuiteNames) v.push_back(entry.first);
        return v;
    }();
    return all;
}

bool mergeable(Experiment e) {
    switch (e) {
        case Experiment::estimate_v:
        case Experiment::estimate_h:
        case Experiment::superharmonic:
        case Experiment::ratio_vdelta:
        case Experiment::phi_check:
            return true;
        default:
            return false;
    }
}

nlohmann::json ExperimentConfig::params() const {
    nlohmann::json j;
    j["experiment"] = experiment ? nlohmann::json(to_string(*experiment)) : nlohmann::json(nullptr);
    j["suite"] = suite ? nlohmann::json(to_string(*suite)) : nlohmann::json(nullptr);
    j["law"] = law;
    j["d"] = d;
    j["start"] = start;
    j["spacing"] = spacing;
    j["T"] = T;
    j["a"] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
    j["horizon"] = horizon;
    j["times"] = times;
    j["n"] = n;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["replica_offset"] = replica_offset;
    j["eps"] = eps;
    j["p"] = p ? nlohmann::json(*p) : nlohmann::json(nullptr);
    j["q"] = q ? nlohmann::json(*q) : nlohmann::json(nullptr);
    j["power"] = power;
    j["v_method"] = v_method;
    j["delta"] = delta;
    j["theta"] = theta;
    j["thetas"] = thetas;
    j["step"] = step;
    j["gap"] = gap;
    j["resample_every"] = resample_every;
    j["ess_fraction"] = ess_fraction;
    j["weight"] = weight;
    j["max_attempts"] = max_attempts;
    j["perturb"] = perturb;
    j["source"] = source;
    j["k"] = k;
    j["L"] = L;
    j["grid"] = grid;
    j["stat_delta"] = stat_delta;
    j["g"] = g;
    j["scale"] = scale == Scale::quick ? "quick" : "desk";
    j["tolerances"] = {{"inequality_se", tol.inequality_se}, {"agreement_se", tol.agreement_se},
                       {"ratio_floor", tol.ratio_floor},     {"coupling_slack", tol.coupling_slack},
                       {"ks_exact", tol.ks_exact},           {"ks_sampler", tol.ks_sampler},
                       {"ks_agreement", tol.ks_agreement},   {"min_ess", tol.min_ess}};
    return j;
}

ExperimentConfig parse_args(int argc, const char* const* argv) {
    ExperimentConfig c;
    RawOptions raw;
    CLI::App app{"owl: ordered random walks lab"};
    build_app(app, c, raw);
    app.parse(argc, argv);
    finish(c, raw);
    return c;
}

int main_entry(int argc, const char* const* argv) {
    ExperimentConfig c;
    RawOptions raw;
    CLI::App app{"owl: ordered random walks lab"};
    build_app(app, c, raw);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        finish(c, raw);
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << '\n';
        return 2;
    }
    return run(c);
}

void validate(const ExperimentConfig& c) {
    const int modes = int(c.experiment.has_value()) + int(c.suite.has_value()) + int(c.merge);
    require(modes == 1, "exactly one of --experiment, --suite or --merge is required");
    if (c.merge) {
        require(!c.inputs.empty(), "--merge needs run logs given with --input");
        return;
    }
    require(c.seed.has_value(), "--seed is mandatory; there is no clock-based default");
    require(c.d >= 1 && c.d <= 64, "--d must lie in [1, 64]");
    require(c.n >= 1, "--n must be at least 1");
    require(std::isfinite(c.horizon) && c.horizon >= 0.0, "--horizon must be finite and >= 0");
    require(std::isfinite(c.T) && c.T > 0.0, "--T must be positive");
    require(c.spacing > 0.0 && std::isfinite(c.spacing), "--spacing must be positive");
    if (c.a) require(*c.a > 0.0 && *c.a < 0.5, "--a must lie in (0, 1/2)");
    if (c.suite) return;
    IncrementLaw::from_name(c.law);
    if (c.replica_offset != 0) {
        require(mergeable(*c.experiment), "--replica-offset is only supported by estimate-v, estimate-h, "
                                          "superharmonic, ratio-vdelta and phi-check");
        require(c.replica_offset % kChunkSize == 0,
                "--replica-offset must be a multiple of " + std::to_string(kChunkSize) + " for exact pooling");
    }
    require(c.v_method == "survival" || c.v_method == "stopped", "--v-method must be survival or stopped");
    require(c.weight == "delta" || c.weight == "h", "--weight must be delta or h");
    require(c.source == "nibm" || c.source == "smc" || c.source == "rejection",
            "--source must be nibm, smc or rejection");
    require(c.ess_fraction > 0.0 && c.ess_fraction <= 1.0, "--ess-fraction must lie in (0, 1]");
    if (c.p) require(*c.p >= 0, "--p must be >= 0");
    if (c.q) require(*c.q >= 0, "--q must be >= 0");
    if (*c.experiment == Experiment::compare)
        require(c.inputs.size() == 2, "compare needs exactly two --input statistic CSVs");
}

}  // namespace owl::cli
