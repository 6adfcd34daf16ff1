#include "io.hpp"

#include <charconv>
#include <sstream>

#include "owl/errors.hpp"

namespace owl::cli {

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path.string()) {
    if (!out_) throw PreconditionError("cannot write " + path_);
    out_ << header << '\n';
}

void CsvWriter::row(std::initializer_list<double> cells) {
    bool first = true;
    for (double c : cells) {
        if (!first) out_ << ',';
        out_ << format_double(c);
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::row(std::uint64_t first, std::initializer_list<double> rest) {
    out_ << first;
    for (double c : rest) out_ << ',' << format_double(c);
    out_ << '\n';
}

void write_ensemble_csv(const WeightedEnsembleSet& set, const std::filesystem::path& path) {
    CsvWriter csv(path, kEnsembleColumns);
    const std::size_t last = set.record_times.size() - 1;
    for (std::size_t i = 0; i < set.size(); ++i)
        csv.row(i, {set.weights[i], set.position(i, last, set.d - 1), set.position(i, last, 0),
                    static_cast<double>(set.survived[i])});
}

void write_eigen_csv(const std::vector<EigenPath>& paths, const std::filesystem::path& path) {
    CsvWriter csv(path, kEigenColumns);
    for (std::size_t r = 0; r < paths.size(); ++r)
        for (std::size_t k = 0; k < paths[r].times.size(); ++k)
            for (int j = 0; j < paths[r].d; ++j)
                csv.row(r, {paths[r].times[k], static_cast<double>(j + 1),
                            paths[r].values(static_cast<Eigen::Index>(k), j)});
}

void write_edge_csv(const std::vector<EdgeEnsemble>& lines, const std::filesystem::path& path) {
    CsvWriter csv(path, kEdgeColumns);
    for (std::size_t r = 0; r < lines.size(); ++r)
        for (int i = 0; i < lines[r].k; ++i)
            for (std::size_t g = 0; g < lines[r].time_grid.size(); ++g)
                csv.row(r, {static_cast<double>(i + 1), lines[r].time_grid[g],
                            lines[r].lines(i, static_cast<Eigen::Index>(g))});
}

void write_statistic_csv(std::span<const double> values, std::span<const double> weights,
                         const std::filesystem::path& path) {
    require(weights.empty() || weights.size() == values.size(), "statistic CSV: weights and values differ in length");
    CsvWriter csv(path, kStatisticColumns);
    const double equal = 1.0 / static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) csv.row(i, {values[i], weights.empty() ? equal : weights[i]});
}

WeightedSample read_statistic_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    require(line == kStatisticColumns,
            path.string() + ": expected header `" + std::string(kStatisticColumns) + "`, got `" + line + "`");
    WeightedSample s;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream cells(line);
        std::string replica, value, weight;
        require(std::getline(cells, replica, ',') && std::getline(cells, value, ',') && std::getline(cells, weight),
                path.string() + ": row " + std::to_string(row) + " does not have three columns");
        try {
            s.values.push_back(std::stod(value));
            s.weights.push_back(std::stod(weight));
        } catch (const std::exception&) {
            throw PreconditionError(path.string() + ": row " + std::to_string(row) + " is not numeric");
        }
    }
    require(!s.values.empty(), path.string() + ": no rows");
    double total = 0.0;
    for (double w : s.weights) total += w;
    require(total > 0.0, path.string() + ": weights sum to zero");
    for (double& w : s.weights) w /= total;
    return s;
}

nlohmann::json to_json(const MCEstimate& e) {
    nlohmann::json j{{"mean", e.mean}, {"se", e.se}, {"n", e.n}, {"seed_fingerprint", e.seed_fingerprint}};
    j["horizon"] = e.horizon ? nlohmann::json(*e.horizon) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const TwoSampleReport& r) {
    return {{"ks", r.ks}, {"mean_gap", r.mean_gap}, {"pooled_se", r.pooled_se}, {"ess_a", r.ess_a}, {"ess_b", r.ess_b}};
}

RunOutput::RunOutput(std::filesystem::path dir, nlohmann::json params, std::string fingerprint)
    : dir_(std::move(dir)), params_(std::move(params)), fingerprint_(std::move(fingerprint)) {
    std::filesystem::create_directories(dir_);
}

void RunOutput::sidecar(std::string_view stem, std::string_view columns, const nlohmann::json& summary) const {
    nlohmann::json j{{"file", std::string(stem) + ".csv"},
                     {"columns", columns},
                     {"params", params_},
                     {"seed_fingerprint", fingerprint_},
                     {"summary", summary}};
    std::ofstream(file(std::string(stem) + ".json"), std::ios::trunc) << j.dump(2) << '\n';
}

void RunOutput::result(std::string_view stem, const nlohmann::json& summary) const {
    nlohmann::json j{{"params", params_}, {"seed_fingerprint", fingerprint_}, {"summary", summary}};
    std::ofstream(file(std::string(stem) + ".json"), std::ios::trunc) << j.dump(2) << '\n';
}

nlohmann::json RunOutput::log(std::string_view op, const MCEstimate& e, const nlohmann::json& extra,
                              const ShardScope* shard, double scale) const {
    nlohmann::json rec = to_json(e);
    rec["op"] = op;
    rec["params"] = params_;
    if (!extra.is_null())
        for (auto it = extra.begin(); it != extra.end(); ++it) rec["params"][it.key()] = it.value();
    if (shard) {
        nlohmann::json chunks = nlohmann::json::array();
        for (const auto& c : shard->partials()) chunks.push_back({c.chunk, c.acc.count(), c.acc.mean(), c.acc.m2()});
        rec["chunks"] = chunks;
        rec["scale"] = scale;
    }
    std::ofstream(file("run_log.jsonl"), std::ios::app) << rec.dump() << '\n';
    return rec;
}

}  // namespace owl::cli
