#include "doctest_main.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "owl/cli.hpp"

using namespace owl::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("owl_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig config(std::vector<std::string> args) {
    args.insert(args.begin(), "owl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return parse_args(static_cast<int>(argv.size()), argv.data());
}

struct Captured {
    int code = 0;
    std::string out, err;
    json first() const { return json::parse(out.substr(0, out.find('\n'))); }
};

Captured capture(const std::function<int()>& body) {
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    Captured c;
    try {
        c.code = body();
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

Captured run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "owl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return capture([&] { return main_entry(static_cast<int>(argv.size()), argv.data()); });
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("single-letter options and defaults parse") {
    const auto c = config({"--experiment", "edge", "--d", "4", "--T", "2500", "--L", "0.5", "--k", "2", "--n", "7",
                           "--a", "0.2", "--g", "tanh", "--seed", "9"});
    CHECK(c.experiment == Experiment::edge);
    CHECK(c.d == 4);
    CHECK(c.T == 2500.0);
    CHECK(c.L == 0.5);
    CHECK(c.k == 2);
    CHECK(c.n == 7);
    REQUIRE(c.a);
    CHECK(*c.a == 0.2);
    CHECK(c.g == "tanh");
    CHECK(*c.seed == 9);
    CHECK(c.law == "gaussian");

    const auto s = config({"--experiment", "ordered-smc", "--start", "0,1.5,4", "--seed", "1"});
    CHECK(s.d == 3);
    CHECK(s.start == std::vector<double>{0.0, 1.5, 4.0});
}

TEST_CASE("config file values are overridden by flags") {
    const auto dir = scratch("config");
    fs::create_directories(dir);
    std::ofstream(dir / "run.ini") << "experiment = estimate-h\nd = 1\nseed = 4\nn = 10\n";
    const auto c = config({"--config", (dir / "run.ini").string(), "--n", "20"});
    CHECK(c.experiment == Experiment::estimate_h);
    CHECK(c.d == 1);
    CHECK(*c.seed == 4);
    CHECK(c.n == 20);
}

TEST_CASE("estimate-h in one dimension is exactly one") {
    const auto dir = scratch("h1");
    const auto r = run_args({"--experiment", "estimate-h", "--d", "1", "--seed", "1", "--n", "50", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto j = r.first();
    CHECK(j.at("mean").get<double>() == 1.0);
    CHECK(j.at("se").get<double>() == 0.0);
    CHECK(fs::exists(dir / "run_log.jsonl"));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes").string();
    CHECK(run_args({"--help"}).code == 0);
    CHECK(run_args({"--experiment", "estimate-h", "--n", "10", "--out", dir}).code == 2);
    CHECK(run_args({"--experiment", "estimate-h", "--bogus", "--seed", "1"}).code == 2);
    CHECK(run_args({"--experiment", "nope", "--seed", "1"}).code == 2);
    CHECK(run_args({"--seed", "1", "--out", dir}).code == 2);
    CHECK(run_args({"--experiment", "ordered-smc", "--start", "0,0,1", "--no-perturb", "--seed", "1", "--n", "10",
                    "--out", dir})
              .code == 2);
    CHECK(run_args({"--experiment", "ordered-smc", "--start", "1,0", "--seed", "1", "--n", "10", "--out", dir}).code ==
          2);
    CHECK(run_args({"--experiment", "ratio-vdelta", "--T", "100", "--seed", "1", "--n", "10", "--out", dir}).code == 2);
    CHECK(run_args({"--experiment", "estimate-h", "--replica-offset", "5", "--seed", "1", "--out", dir}).code == 2);
    CHECK(run_args({"--experiment", "nibm", "--replica-offset", "1024", "--seed", "1", "--out", dir}).code == 2);
    const auto extinct = run_args({"--experiment", "ordered-smc", "--d", "4", "--horizon", "200", "--resample-every",
                                   "100", "--n", "100", "--seed", "1", "--out", dir});
    CHECK(extinct.code == 3);
    CHECK(extinct.err.find("left the chamber") != std::string::npos);
}

TEST_CASE("thread count does not change any CSV byte") {
    const std::vector<std::vector<std::string>> runs{
        {"--experiment", "free-sim", "--n", "3000", "--horizon", "3"},
        {"--experiment", "nibm", "--n", "300", "--times", "1,2"},
        {"--experiment", "zeta-check", "--n", "5000"},
        {"--experiment", "ordered-smc", "--n", "2000", "--horizon", "5"},
        {"--experiment", "edge", "--source", "smc", "--n", "500", "--T", "100", "--L", "0.5", "--grid", "5"},
    };
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CAPTURE(runs[i][1]);
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "4"}) {
            const auto dir = scratch("det" + std::to_string(i) + "_" + threads);
            auto args = runs[i];
            args.insert(args.end(), {"--seed", "77", "--threads", threads, "--out", dir.string()});
            REQUIRE(run_args(args).code == 0);
            dirs.push_back(dir);
        }
        std::size_t compared = 0;
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            if (entry.path().extension() != ".csv") continue;
            CAPTURE(entry.path().filename().string());
            CHECK(slurp(entry.path()) == slurp(dirs[1] / entry.path().filename()));
            ++compared;
        }
        CHECK(compared > 0);
    }
}

TEST_CASE("sharded runs merge to the single run exactly") {
    const auto whole = scratch("whole"), a = scratch("shard_a"), b = scratch("shard_b"), m = scratch("merged");
    const std::vector<std::string> base{"--experiment", "estimate-v", "--horizon", "3", "--seed", "5"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return args;
    };
    REQUIRE(run_args(with({"--n", "2048", "--out", whole.string()})).code == 0);
    REQUIRE(run_args(with({"--n", "1024", "--out", a.string()})).code == 0);
    REQUIRE(run_args(with({"--n", "1024", "--replica-offset", "1024", "--out", b.string()})).code == 0);
    const auto merged = run_args({"--merge", "--input", (a / "run_log.jsonl").string(), "--input",
                                  (b / "run_log.jsonl").string(), "--seed", "5", "--out", m.string()});
    REQUIRE(merged.code == 0);
    const auto single = json::parse(slurp(whole / "run_log.jsonl").substr(0, slurp(whole / "run_log.jsonl").find('\n')));
    const auto pooled = merged.first();
    CHECK(pooled.at("mean").get<double>() == single.at("mean").get<double>());
    CHECK(pooled.at("se").get<double>() == single.at("se").get<double>());
    CHECK(pooled.at("n").get<std::uint64_t>() == 2048);
    CHECK(pooled.at("horizon") == single.at("horizon"));
    CHECK(pooled.at("merged_from").get<int>() == 2);

    const auto twice = run_args({"--merge", "--input", (a / "run_log.jsonl").string(), "--input",
                                 (a / "run_log.jsonl").string(), "--seed", "5", "--out", m.string()});
    CHECK(twice.code == 2);
}

TEST_CASE("compare of a sample with itself has zero distance") {
    const auto dir = scratch("cmp");
    REQUIRE(run_args({"--experiment", "top-stat", "--n", "300", "--T", "100", "--seed", "2", "--out", dir.string()})
                .code == 0);
    const auto csv = (dir / "top-stat.csv").string();
    const auto r = run_args({"--experiment", "compare", "--input", csv, "--input", csv, "--seed", "2", "--out",
                             (dir / "cmp").string()});
    REQUIRE(r.code == 0);
    CHECK(r.first().at("ks").get<double>() == 0.0);
    CHECK(r.first().at("mean_gap").get<double>() == 0.0);
}

TEST_CASE("orders suite flags the counterexample and accepts the built-in laws") {
    auto c = config({"--suite", "orders", "--scale", "quick", "--seed", "3"});
    const auto report = capture([&] {
                            const auto r = run_suite(Suite::orders, c);
                            std::cout << r.dump();
                            return 0;
                        }).first();
    const auto& crit = report.at("criteria").at(0);
    CHECK(crit.at("pass").get<bool>());
    for (const auto& law : crit.at("builtin_laws")) CHECK(law.at("holds").get<bool>());
    const auto& bad = crit.at("counterexample");
    CHECK(bad.at("violation_detected").get<bool>());
    CHECK_FALSE(bad.at("log_concave").get<bool>());
    CHECK(bad.at("witness").at("witness").size() == 2);
}

TEST_CASE("coupling suite reports a coarse step") {
    auto c = config({"--suite", "coupling", "--scale", "quick", "--step", "0.5", "--seed", "3"});
    const auto report = run_suite(Suite::coupling, c);
    const auto& crit = report.at("criteria").at(0);
    CHECK_FALSE(crit.at("pass").get<bool>());
    std::uint64_t coarse = 0;
    for (const auto& cell : crit.at("cells")) coarse += cell.at("step_too_coarse").get<std::uint64_t>();
    CHECK(coarse > 0);
}
