#include "doctest_main.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "owl/errors.hpp"
#include "owl/parallel.hpp"
#include "owl/scaling.hpp"
#include "owl/tolerances.hpp"

using namespace owl;

namespace {

const IncrementLaw kGauss = IncrementLaw::gaussian();

std::vector<double> normals(std::uint64_t seed, std::size_t n, double mean) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(mean, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = z(gen);
    return v;
}

// Constant walker values on [0, horizon].
PathEnsemble constant_paths(std::vector<double> start, double horizon) {
    return PathEnsemble(std::move(start), horizon, std::vector<WalkerEvents>(3));
}

}  // namespace

TEST_CASE("edge rescaling formula") {
    const double T = 400.0, a = 0.2, L = 0.5;
    const double centre = 2.0 * std::pow(T, 0.5 + a / 2.0);
    const double horizon = edge_required_horizon(T, a, L);
    const auto flat = constant_paths({-5.0, 0.0, centre}, horizon);
    const auto e = edge_rescale(flat, T, a, 2, L, 5);
    CHECK(e.time_grid == std::vector<double>{-0.5, -0.25, 0.0, 0.25, 0.5});
    CHECK_THROWS_AS(edge_rescale(flat, T, a, 2, 1.0, 5), PreconditionError);
    for (std::size_t g = 0; g < 5; ++g)
        CHECK(e.lines(0, static_cast<Eigen::Index>(g)) ==
              doctest::Approx(-2.0 * std::pow(T, a / 3.0) * e.time_grid[g]).epsilon(1e-12));
    CHECK(e.lines(1, 2) == doctest::Approx(std::pow(T, a / 6.0 - 0.5) * (0.0 - centre)));
    for (Eigen::Index g = 0; g < 5; ++g) CHECK(e.lines(0, g) > e.lines(1, g));
    CHECK(top_particle_statistic(flat, T, a) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(top_particle_statistic(flat, T, a) == e.lines(0, 2));

    try {
        edge_rescale(constant_paths({0.0, 1.0, 2.0}, T), T, a, 2, L, 5);
        FAIL("accepted a short horizon");
    } catch (const PreconditionError& err) {
        CHECK(std::string(err.what()).find(std::to_string(horizon)) != std::string::npos);
    }
    CHECK_THROWS_AS(edge_rescale(flat, T, a, 4, L, 5), PreconditionError);
}

TEST_CASE("edge rescaling of random sources keeps lines ordered") {
    const double T = 100.0, a = default_edge_exponent(4, T), L = 0.5;
    const auto grid = edge_grid(L, 7);
    const auto times = edge_source_times(T, a, grid);
    const auto paths = nibm_matrix_marginals(std::vector<double>(4, 0.0), times, 500, RngStream(1, {80, 0, 0}));
    const auto set = SnapshotSet::from(paths);
    for (const auto& e : edge_rescale_all(set, T, a, 3, L, 7))
        for (Eigen::Index g = 0; g < 7; ++g) {
            CHECK(e.lines(0, g) > e.lines(1, g));
            CHECK(e.lines(1, g) > e.lines(2, g));
        }
    const auto ens = simulate_free(3, std::vector<double>{0.0, 1.0, 2.0}, 200.0, kGauss, RngStream(2, {81, 0, 0}));
    const auto e = edge_rescale(ens, T, default_edge_exponent(3, T), 3, L, 5);
    CHECK(e.lines(0, 0) == doctest::Approx(std::pow(T, default_edge_exponent(3, T) / 6.0 - 0.5) *
                                           (ens.value_at(2, e.T + 2.0 * std::pow(T, 1.0 - e.a / 3.0) * -L) -
                                            2.0 * std::pow(T, 0.5 + e.a / 2.0) + 2.0 * std::pow(T, 0.5 + e.a / 6.0) * L)));
}

TEST_CASE("edge rescaling commutes with Brownian scaling") {
    // NIBM to horizon T with (T, a) vs the N = T^a form at horizon 1.
    const int N = 5;
    const double T = 100.0, a = default_edge_exponent(N, T), t = 0.5;
    const auto grid = edge_grid(t, 3);
    const auto big = nibm_matrix_marginals(std::vector<double>(N, 0.0), edge_source_times(T, a, grid), 50000,
                                           RngStream(3, {82, 0, 0}));
    const auto at_T = edge_rescale_all(SnapshotSet::from(big), T, a, 1, t, 3);
    // N^{1/6}(B_N(1 + 2 N^{-1/3} t) - 2 sqrt(N) - 2 N^{1/6} t)
    const double s = 1.0 + 2.0 * std::pow(N, -1.0 / 3.0) * t;
    const auto unit = nibm_matrix_marginals(std::vector<double>(N, 0.0), std::vector<double>{s}, 50000,
                                            RngStream(3, {83, 0, 0}));
    std::vector<double> x, y;
    for (const auto& e : at_T) x.push_back(e.lines(0, 2));
    for (const auto& p : unit)
        y.push_back(std::pow(N, 1.0 / 6.0) * (p.values(0, N - 1) - 2.0 * std::sqrt(N) - 2.0 * std::pow(N, 1.0 / 6.0) * t));
    CHECK(two_sample_report({x, {}}, {y, {}}).ks <= 0.02);
}

TEST_CASE("NIBM marginals scale like Brownian motion") {
    const auto paths = nibm_matrix_marginals(std::vector<double>(4, 0.0), std::vector<double>{4.0}, 100000,
                                             RngStream(4, {84, 0, 0}));
    const auto unit = nibm_matrix_marginals(std::vector<double>(4, 0.0), std::vector<double>{1.0}, 100000,
                                            RngStream(4, {85, 0, 0}));
    std::vector<double> x, y;
    for (const auto& p : paths) x.push_back(p.values(0, 3));
    for (const auto& p : unit) y.push_back(2.0 * p.values(0, 3));
    CHECK(two_sample_report({x, {}}, {y, {}}).ks <= 0.02);
}

TEST_CASE("linear statistics") {
    const double T = 100.0;
    const int d = 3;
    const double a = default_edge_exponent(d, T);
    const auto paths = nibm_matrix_marginals(std::vector<double>(d, 0.0), std::vector<double>{T}, 50000,
                                             RngStream(5, {86, 0, 0}));
    const auto set = SnapshotSet::from(paths);
    for (double v : linear_statistic(set, LinearStatisticSpec::constant_one(), T, a)) CHECK(v == 3.0);

    WeightedSample sq{linear_statistic(set, LinearStatisticSpec::final_square(), T, a), {}};
    CHECK(std::abs(sq.mean() - d * d * std::pow(T, -a)) <= 3.0 * sq.se());

    const LinearStatisticSpec linear{{1.0}, {{0.0, 1.0}}, 0.5};
    std::vector<PathEnsemble> walks;
    for (std::uint64_t r = 0; r < 5000; ++r)
        walks.push_back(simulate_free(d, std::vector<double>{-1.0, 0.0, 1.0}, T, kGauss, RngStream(6, {87, 0, 0}).replica(r)));
    const auto ws = SnapshotSet::from(walks, linear.source_times(T));
    WeightedSample lin{linear_statistic(ws, linear, T, a), {}};
    CHECK(std::abs(lin.mean()) <= 4.0 * lin.se());

    const LinearStatisticSpec bad{{0.2}, {{1.0}}, 0.5};
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    const LinearStatisticSpec quintic{{1.0}, {{0, 0, 0, 0, 0, 1}}, 0.5};
    CHECK_THROWS_AS(quintic.validate(), PreconditionError);
}

TEST_CASE("centered linear statistic variance is stable in T") {
    const int d = 3;
    const std::vector<double> start{0.0, 1.0, 2.0};
    std::vector<double> variances;
    for (const double T : {100.0, 400.0}) {
        const double a = default_edge_exponent(d, T);
        const auto spec = LinearStatisticSpec::final_square();
        const auto times = spec.source_times(T);
        const auto paths = nibm_matrix_marginals(start, times, 20000, RngStream(8, {88, static_cast<std::uint64_t>(T), 0}));
        const auto stat = linear_statistic(SnapshotSet::from(paths), spec, T, a);
        const auto centered = centered_statistic_samples({stat, {}}, GMap::identity_clipped);
        double ss = 0.0;
        for (double v : centered) ss += v * v;
        variances.push_back(ss / static_cast<double>(centered.size() - 1));
    }
    CHECK(variances[0] > 0.0);
    CHECK(std::abs(variances[1] / variances[0] - 1.0) <= desk::kVarianceStability);
}

TEST_CASE("two-sample KS") {
    const auto a = normals(1, 10000, 0.0);
    CHECK(two_sample_report({a, {}}, {a, {}}).ks == 0.0);
    int below = 0;
    const double crit = 1.95 * std::sqrt(2.0 / 10000);
    for (std::uint64_t s = 0; s < 200; ++s)
        if (two_sample_report({normals(100 + 2 * s, 10000, 0.0), {}}, {normals(101 + 2 * s, 10000, 0.0), {}}).ks < crit)
            ++below;
    CHECK(below >= 198);
    const auto shifted = two_sample_report({a, {}}, {normals(2, 10000, 1.0), {}});
    CHECK(shifted.ks > 0.3);
    CHECK(shifted.mean_gap == doctest::Approx(-1.0).epsilon(0.05));

    const auto ties = two_sample_report({{1.0, 1.0, 2.0}, {}}, {{1.0, 2.0, 2.0}, {}});
    CHECK(ties.ks == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(two_sample_report({{}, {}}, {{1.0}, {}}), PreconditionError);
}

TEST_CASE("weighted summaries are invariant under permutation and rescaling") {
    std::vector<double> v{0.3, -1.2, 2.5, 0.9, 4.0};
    std::vector<double> w{0.1, 0.3, 0.2, 0.25, 0.15};
    const WeightedSample base{v, w};
    std::vector<std::size_t> perm{3, 0, 4, 2, 1};
    WeightedSample permuted;
    for (std::size_t i : perm) {
        permuted.values.push_back(v[i]);
        permuted.weights.push_back(w[i]);
    }
    CHECK(permuted.mean() == doctest::Approx(base.mean()));
    CHECK(permuted.se() == doctest::Approx(base.se()));
    CHECK(two_sample_report(base, permuted).ks == doctest::Approx(0.0));
    WeightedSample scaled{v, {}};
    double total = 0.0;
    for (double x : w) total += 7.0 * x;
    for (double x : w) scaled.weights.push_back(7.0 * x / total);
    CHECK(scaled.mean() == doctest::Approx(base.mean()));
    // Equal explicit weights match the unweighted form.
    const WeightedSample eq{v, std::vector<double>(5, 0.2)};
    CHECK(eq.mean() == doctest::Approx(WeightedSample{v, {}}.mean()));
    CHECK(eq.ess() == doctest::Approx(5.0));
}

TEST_CASE("centered statistics and the g catalog") {
    const WeightedSample constant{std::vector<double>(10, 4.2), {}};
    for (GMap g : {GMap::identity_clipped, GMap::tanh, GMap::smooth_indicator})
        for (double v : centered_statistic_samples(constant, g)) CHECK(v == apply(g, 0.0));
    CHECK(apply(GMap::identity_clipped, 50.0) == 10.0);
    CHECK(apply(GMap::smooth_indicator, 0.0) == 0.5);
    CHECK(g_map_from_name("tanh") == GMap::tanh);
    CHECK_THROWS_AS(g_map_from_name("cube"), PreconditionError);
}

TEST_CASE("snapshot lookup names the missing time") {
    const auto paths = nibm_matrix_marginals(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 2.0}, 10,
                                             RngStream(7, {88, 0, 0}));
    const auto set = SnapshotSet::from(paths);
    CHECK(set.time_index(2.0) == 1);
    CHECK(set.at(3, 1, 1) == paths[3].values(1, 1));
    CHECK_THROWS_WITH_AS(set.time_index(1.5), doctest::Contains("1.5"), PreconditionError);
}
