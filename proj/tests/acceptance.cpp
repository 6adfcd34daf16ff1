// Desk-scale acceptance run: one PASS/FAIL line per criterion.
// Exit status is 1 when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "owl/cli.hpp"
#include "owl/parallel.hpp"
#include "owl/tolerances.hpp"

using namespace owl::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 20261015;

void line(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s %s%s%s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.empty() ? "" : " :: ", detail.c_str());
    std::fflush(stdout);
}

std::string brief(const json& c) {
    if (c.contains("error")) return c.at("error").get<std::string>();
    json shown = json::object();
    for (const auto& [k, v] : c.items())
        if (k != "name" && k != "pass" && !v.is_array() && !v.is_object()) shown[k] = v;
    for (const char* k : {"ratio_t1", "ratio_t2", "t100", "t400", "trace_square", "walk", "nibm"})
        if (c.contains(k)) shown[k] = c.at(k);
    return shown.dump();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_quiet(std::vector<std::string> args) {
    args.insert(args.begin(), "owl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = main_entry(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);
    return code;
}

/// Reruns CSV-writing experiments and one suite at 1 and 4 threads.
json determinism(const fs::path& root) {
    const std::vector<std::vector<std::string>> runs{
        {"--experiment", "free-sim", "--n", "5000", "--horizon", "5"},
        {"--experiment", "zeta-check", "--n", "20000"},
        {"--experiment", "nibm", "--n", "2000", "--times", "1,4"},
        {"--experiment", "ordered-smc", "--n", "5000", "--horizon", "10"},
        {"--experiment", "edge", "--source", "smc", "--n", "2000", "--T", "100", "--L", "0.5", "--grid", "9"},
        {"--experiment", "linstat", "--source", "smc", "--n", "2000", "--T", "100"},
        {"--suite", "coupling", "--scale", "quick"},
    };
    std::size_t files = 0, mismatched = 0;
    json mismatches = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::vector<fs::path> dirs;
        for (const char* threads : {"1", "4"}) {
            const auto dir = root / ("run" + std::to_string(i) + "-threads" + threads);
            fs::remove_all(dir);
            auto args = runs[i];
            args.insert(args.end(), {"--seed", std::to_string(kSeed), "--threads", threads, "--out", dir.string()});
            if (run_quiet(args) != 0) return {{"pass", false}, {"error", "run failed: " + runs[i][1]}};
            dirs.push_back(dir);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto ext = entry.path().extension();
            if (ext != ".csv" && entry.path().filename().string().rfind("suite-", 0) != 0) continue;
            ++files;
            if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename())) {
                ++mismatched;
                mismatches.push_back(entry.path().string());
            }
        }
    }
    owl::set_default_threads(0);
    return {{"pass", files > 0 && mismatched == 0}, {"files_compared", files}, {"mismatched", mismatches}};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-out");
    fs::create_directories(out);
    ExperimentConfig base;
    base.seed = kSeed;
    base.scale = Scale::desk;
    std::printf("acceptance: seed %llu, output %s\n", static_cast<unsigned long long>(kSeed), out.c_str());
    std::printf("tolerances: inequality %.1f SE, agreement %.1f SE, ratio floor %.2f, coupling slack %.0e, "
                "KS exact/sampler/agreement %.2f/%.2f/%.2f, min ESS %.0f, repulsion decay %.1f SE\n",
                owl::desk::kInequalitySe, owl::desk::kAgreementSe, owl::desk::kRatioFloor, owl::desk::kCouplingSlack,
                owl::desk::kKsExact, owl::desk::kKsSampler, owl::desk::kKsAgreement, owl::desk::kMinEffectiveSamples,
                owl::desk::kRepulsionDecaySe);
    std::fflush(stdout);

    json summary = json::object();
    std::size_t failed = 0, total = 0;
    for (const Suite suite : all_suites()) {
        const auto start = std::chrono::steady_clock::now();
        const json report = run_suite(suite, base);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream(out / ("suite-" + std::string(to_string(suite)) + ".json")) << report.dump(2) << '\n';
        for (const auto& c : report.at("criteria")) {
            const bool pass = c.at("pass").get<bool>();
            line(pass, c.at("name").get<std::string>(), brief(c));
            failed += pass ? 0 : 1;
            ++total;
        }
        std::printf("  (%s: %.0f s)\n", std::string(to_string(suite)).c_str(), secs);
        summary[std::string(to_string(suite))] = report.at("pass");
    }
    const json det = determinism(out / "determinism");
    line(det.at("pass").get<bool>(), "determinism across thread counts", det.dump());
    failed += det.at("pass").get<bool>() ? 0 : 1;
    ++total;
    summary["determinism"] = det.at("pass");
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
    std::printf("acceptance: %zu of %zu criteria passed\n", total - failed, total);
    return failed == 0 ? 0 : 1;
}
