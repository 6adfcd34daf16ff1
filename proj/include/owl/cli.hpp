#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "owl/tolerances.hpp"

namespace owl::cli {

enum class Experiment {
    free_sim,
    estimate_v,
    estimate_h,
    superharmonic,
    ratio_vdelta,
    ratio_deltah,
    lr_check,
    zeta_check,
    phi_check,
    ordered_rejection,
    ordered_smc,
    nibm,
    coupling,
    edge,
    top_stat,
    linstat,
    compare,
    repulsion_probe,
    moment_probe,
};

std::string_view to_string(Experiment e);
Experiment experiment_from_name(std::string_view name);
const std::vector<Experiment>& all_experiments();

enum class Suite { inequalities, orders, coupling, edge_agreement, linstat_agreement };

std::string_view to_string(Suite s);
Suite suite_from_name(std::string_view name);
const std::vector<Suite>& all_suites();

/// Tolerances the suites compare against; defaults are the desk values.
struct Tolerances {
    double inequality_se = desk::kInequalitySe;
    double agreement_se = desk::kAgreementSe;
    double ratio_floor = desk::kRatioFloor;
    double coupling_slack = desk::kCouplingSlack;
    double ks_exact = desk::kKsExact;
    double ks_sampler = desk::kKsSampler;
    double ks_agreement = desk::kKsAgreement;
    double min_ess = desk::kMinEffectiveSamples;
};

/// Suite scale: `desk` is the documented scale, `quick` a reduced smoke scale.
enum class Scale { desk, quick };

struct ExperimentConfig {
    std::optional<Experiment> experiment;
    std::optional<Suite> suite;
    /// Pool the run logs listed in `inputs` instead of running anything.
    bool merge = false;
    std::string law = "gaussian";
    int d = 3;
    /// Explicit start; empty means 0, spacing, 2 spacing, ...
    std::vector<double> start;
    double spacing = 1.0;
    double T = 100.0;
    /// Edge/linear-statistic exponent; unset means log d / log T.
    std::optional<double> a;
    double horizon = 10.0;
    /// Record times (samplers), time grid (nibm) or t values (repulsion-probe).
    std::vector<double> times;
    std::uint64_t n = 10000;
    std::optional<std::uint64_t> seed;
    /// First replica index; nonzero only for sharded runs of mergeable estimates.
    std::uint64_t replica_offset = 0;
    std::filesystem::path out = "owl-out";
    unsigned threads = 0;

    double eps = 0.05;
    std::optional<int> p;
    std::optional<int> q;
    double power = 2.0;
    std::string v_method = "survival";
    double delta = 0.25;
    double theta = 0.0;
    std::vector<double> thetas{0.0, 0.5, 1.0, 2.0};
    double step = 1e-3;
    /// Coupling: the y system starts with spacing `spacing + gap`.
    double gap = 1.0;
    double resample_every = 1.0;
    double ess_fraction = desk::kEssResampleFraction;
    std::string weight = "delta";
    std::uint64_t max_attempts = 0;
    bool perturb = true;
    bool dump_paths = false;
    /// Walk-side sampler for edge, top-stat and linstat: nibm, smc or rejection.
    std::string source = "nibm";
    int k = 1;
    double L = 0.0;
    std::size_t grid = 1;
    double stat_delta = 1.0;
    std::string g = "identity-clipped";
    std::vector<std::string> inputs;
    /// Counterexample density for suite(orders); built-in bump density when empty.
    std::string counterexample;
    Scale scale = Scale::desk;
    Tolerances tol;

    /// Parameters as recorded in sidecars and the run log (no threads, no paths).
    nlohmann::json params() const;
};

/// Parses flags (and --config key=value files). Throws PreconditionError on
/// invalid values; CLI11 parse errors propagate as CLI::ParseError.
ExperimentConfig parse_args(int argc, const char* const* argv);

/// Full command-line entry point: parses, runs and maps errors to exit codes.
int main_entry(int argc, const char* const* argv);

/// True for experiments whose run-log records can be pooled across shards.
bool mergeable(Experiment e);

/// Checks every numeric parameter the selected experiment uses.
void validate(const ExperimentConfig& config);

/// Runs the experiment or suite; returns the process exit code
/// (0 ok, 2 precondition failure, 3 feasibility failure).
int run(const ExperimentConfig& config);

/// Runs a suite and returns its report {suite, pass, criteria: [...]}.
/// Failures are entries, never exceptions.
nlohmann::json run_suite(Suite suite, const ExperimentConfig& config);

/// Pools run-log records of sharded runs: records with equal op and params
/// (up to n and replica_offset) are folded chunk by chunk. Throws
/// PreconditionError on overlapping or non-mergeable records.
std::vector<nlohmann::json> merge_run_logs(const std::vector<std::filesystem::path>& logs);

}  // namespace owl::cli
