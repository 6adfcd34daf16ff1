#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "owl/cli.hpp"
#include "owl/conditioned.hpp"
#include "owl/increments.hpp"
#include "owl/paths.hpp"
#include "owl/rng.hpp"
#include "owl/scaling.hpp"

namespace owl::cli {

/// Stream experiment id of a CLI experiment; suites use ids from 100 up.
std::uint32_t stream_id(Experiment e);

WeylPoint start_point(const ExperimentConfig& c);
std::vector<double> start_vector(const ExperimentConfig& c);
double edge_exponent(const ExperimentConfig& c);

/// Walk-side or NIBM snapshots at `times` (sorted), drawn per c.source.
/// Sampler diagnostics are added to `diag`.
SnapshotSet sample_source(const ExperimentConfig& c, std::string_view source, const IncrementLaw& law,
                          std::span<const double> times, const RngStream& root, nlohmann::json& diag);

/// Runs one experiment, writing its artifacts to c.out. Throws on errors.
void run_experiment(const ExperimentConfig& c);

}  // namespace owl::cli
