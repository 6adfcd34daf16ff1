#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "owl/conditioned.hpp"
#include "owl/estimate.hpp"
#include "owl/parallel.hpp"
#include "owl/scaling.hpp"

namespace owl::cli {

/// Shortest text that reads back to the same double.
std::string format_double(double x);

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, std::string_view header);
    /// Writes one row; cells are formatted with format_double.
    void row(std::initializer_list<double> cells);
    void row(std::uint64_t first, std::initializer_list<double> rest);

  private:
    std::ofstream out_;
    std::string path_;
};

inline constexpr std::string_view kEnsembleColumns = "replica,weight,top_final,bottom_final,tau_survived";
inline constexpr std::string_view kEigenColumns = "replica,time,rank,value";
inline constexpr std::string_view kEdgeColumns = "replica,line,grid_time,value";
inline constexpr std::string_view kStatisticColumns = "replica,value,weight";

void write_ensemble_csv(const WeightedEnsembleSet& set, const std::filesystem::path& path);
/// Rank 1 is the lowest eigenvalue.
void write_eigen_csv(const std::vector<EigenPath>& paths, const std::filesystem::path& path);
void write_edge_csv(const std::vector<EdgeEnsemble>& lines, const std::filesystem::path& path);
/// Empty weights are written as 1/n.
void write_statistic_csv(std::span<const double> values, std::span<const double> weights,
                         const std::filesystem::path& path);

/// Reads a `replica,value,weight` file.
WeightedSample read_statistic_csv(const std::filesystem::path& path);

nlohmann::json to_json(const MCEstimate& e);
nlohmann::json to_json(const TwoSampleReport& r);

/// Output directory of one run: CSVs with JSON sidecars and the run log.
class RunOutput {
  public:
    RunOutput(std::filesystem::path dir, nlohmann::json params, std::string fingerprint);

    std::filesystem::path file(std::string_view name) const { return dir_ / std::string(name); }
    /// Writes `<stem>.json` next to `<stem>.csv` with params, fingerprint and summary.
    void sidecar(std::string_view stem, std::string_view columns, const nlohmann::json& summary) const;
    /// Writes `<stem>.json` for results without a CSV.
    void result(std::string_view stem, const nlohmann::json& summary) const;
    /// Appends one record to run_log.jsonl and returns it. Chunk partials make
    /// the record mergeable; `scale` is applied after folding them.
    nlohmann::json log(std::string_view op, const MCEstimate& e, const nlohmann::json& extra = {},
                       const ShardScope* shard = nullptr, double scale = 1.0) const;

    const nlohmann::json& params() const { return params_; }
    const std::string& fingerprint() const { return fingerprint_; }

  private:
    std::filesystem::path dir_;
    nlohmann::json params_;
    std::string fingerprint_;
};

}  // namespace owl::cli
