#include <fstream>
#include <iostream>
#include <map>

#include "io.hpp"
#include "owl/errors.hpp"
#include "owl/parallel.hpp"
#include "runner.hpp"

namespace owl::cli {
namespace {

nlohmann::json merge_key(const nlohmann::json& rec) {
    nlohmann::json params = rec.at("params");
    params.erase("n");
    params.erase("replica_offset");
    params.erase("seed");
    return {rec.at("op"), params, rec.at("seed_fingerprint")};
}

void write_merged(const ExperimentConfig& c) {
    const auto merged = merge_run_logs({c.inputs.begin(), c.inputs.end()});
    std::filesystem::create_directories(c.out);
    std::ofstream out(c.out / "merged.jsonl", std::ios::trunc);
    for (const auto& rec : merged) {
        out << rec.dump() << '\n';
        std::cout << rec.dump() << '\n';
    }
}

void write_suite(const ExperimentConfig& c) {
    const auto report = run_suite(*c.suite, c);
    std::filesystem::create_directories(c.out);
    std::ofstream(c.out / ("suite-" + std::string(to_string(*c.suite)) + ".json"), std::ios::trunc)
        << report.dump(2) << '\n';
    for (const auto& entry : report.at("criteria"))
        std::cout << (entry.at("pass").get<bool>() ? "PASS " : "FAIL ") << entry.at("name").get<std::string>() << '\n';
    std::cout << report.dump() << '\n';
}

}  // namespace

std::vector<nlohmann::json> merge_run_logs(const std::vector<std::filesystem::path>& logs) {
    std::map<std::string, std::vector<nlohmann::json>> groups;
    std::vector<std::string> order;
    for (const auto& path : logs) {
        std::ifstream in(path);
        require(static_cast<bool>(in), "cannot read run log " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw PreconditionError(path.string() + ": malformed run-log line: " + e.what());
            }
            if (!rec.contains("chunks") || rec.at("chunks").empty()) continue;
            const std::string key = merge_key(rec).dump();
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(std::move(rec));
        }
    }
    require(!groups.empty(), "merge: no mergeable records in the given run logs");
    std::vector<nlohmann::json> out;
    for (const auto& key : order) {
        const auto& recs = groups[key];
        std::map<std::uint64_t, Accumulator> chunks;
        const double scale = recs.front().at("scale").get<double>();
        for (const auto& rec : recs) {
            require(rec.at("scale").get<double>() == scale, "merge: records of " + rec.at("op").get<std::string>() +
                                                                " disagree on the start point scale");
            for (const auto& c : rec.at("chunks")) {
                const auto index = c.at(0).get<std::uint64_t>();
                require(!chunks.count(index), "merge: chunk " + std::to_string(index) + " of " +
                                                  rec.at("op").get<std::string>() + " appears in more than one shard");
                chunks[index] = Accumulator::from_state(c.at(1).get<std::uint64_t>(), c.at(2).get<double>(),
                                                        c.at(3).get<double>());
            }
        }
        Accumulator total;
        nlohmann::json chunk_list = nlohmann::json::array();
        for (const auto& [index, acc] : chunks) {
            total.merge(acc);
            chunk_list.push_back({index, acc.count(), acc.mean(), acc.m2()});
        }
        const auto& first = recs.front();
        MCEstimate e = total.estimate(first.at("seed_fingerprint").get<std::string>()).scaled(scale);
        if (!first.at("horizon").is_null()) e.horizon = first.at("horizon").get<double>();
        nlohmann::json rec = to_json(e);
        rec["op"] = first.at("op");
        rec["params"] = first.at("params");
        rec["params"]["n"] = total.count();
        rec["params"]["replica_offset"] = chunks.begin()->first * kChunkSize;
        rec["chunks"] = chunk_list;
        rec["scale"] = scale;
        rec["merged_from"] = recs.size();
        out.push_back(std::move(rec));
    }
    return out;
}

int run(const ExperimentConfig& c) {
    try {
        validate(c);
        set_default_threads(c.threads);
        if (c.merge)
            write_merged(c);
        else if (c.suite)
            write_suite(c);
        else
            run_experiment(c);
        return 0;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << '\n';
        return 2;
    } catch (const FeasibilityError& e) {
        std::cerr << "sampler infeasible: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace owl::cli
