#include "doctest_main.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "owl/errors.hpp"
#include "owl/parallel.hpp"
#include "owl/paths.hpp"

using namespace owl;

namespace {

const IncrementLaw kGauss = IncrementLaw::gaussian();

PathEnsemble single_jump(std::vector<double> start, double horizon, int walker, double time, double inc) {
    std::vector<std::vector<double>> times(start.size()), incs(start.size());
    times[static_cast<std::size_t>(walker)] = {time};
    incs[static_cast<std::size_t>(walker)] = {inc};
    return PathEnsemble::from_increments(std::move(start), horizon, times, incs);
}

}  // namespace

TEST_CASE("WeylPoint validation names the violated pair") {
    CHECK(WeylPoint({0.0, 1.0, 2.0}).min_spacing() == doctest::Approx(1.0));
    CHECK(std::isinf(WeylPoint({3.0}).min_spacing()));
    try {
        WeylPoint({0.0, 2.0, 2.0});
        FAIL("accepted a tie");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("x_2") != std::string::npos);
    }
}

TEST_CASE("PathEnsemble construction rules") {
    CHECK_THROWS_AS(PathEnsemble({0.0}, 1.0, {{{0.5, 0.4}, {1.0, 2.0}}}), PreconditionError);
    CHECK_THROWS_AS(PathEnsemble({0.0}, 1.0, {{{1.5}, {1.0}}}), PreconditionError);
    CHECK_THROWS_AS(PathEnsemble({0.0, 1.0}, 1.0, {{{0.5}, {1.0}}, {{0.5}, {2.0}}}), PreconditionError);
}

TEST_CASE("simulate_free: jump count concentration") {
    const RngStream root(11, {1, 0, 0});
    const auto ens = simulate_free(1, std::vector<double>{0.0}, 1e4, kGauss, root.replica(0));
    CHECK(std::abs(static_cast<double>(ens.total_events()) - 1e4) <= 4.0 * 100.0);
}

TEST_CASE("simulate_free: horizon zero has no events") {
    const std::vector<double> start{0.0, 1.0, 2.0};
    const auto ens = simulate_free(3, start, 0.0, kGauss, RngStream(3, {1, 0, 0}));
    CHECK(ens.total_events() == 0);
    CHECK(ens.positions_at(0.0) == start);
}

TEST_CASE("simulate_free: variance of S_1(t) is t") {
    const RngStream root(5, {2, 0, 0});
    const double t = 1e3;
    const auto acc = reduce_replicas<Accumulator>(10000, [&](Accumulator& a, std::uint64_t r) {
        const auto ens = simulate_free(2, std::vector<double>{0.0, 1.0}, t, kGauss, root.replica(r));
        a.add(ens.value_at(0, t));
    });
    CHECK(std::abs(acc.variance() / t - 1.0) < 0.05);
}

TEST_CASE("positions_at conventions") {
    const std::vector<double> start{0.0, 1.0};
    const auto ens = simulate_free(2, start, 5.0, kGauss, RngStream(9, {3, 0, 7}));
    CHECK(ens.positions_at(0.0) == start);
    for (int j = 0; j < 2; ++j) {
        const auto& w = ens.walker(j);
        REQUIRE(!w.times.empty());
        CHECK(ens.value_at(j, std::nextafter(w.times.front(), 0.0)) == start[static_cast<std::size_t>(j)]);
        CHECK(ens.value_at(j, w.times.front()) == w.values.front());
        CHECK(ens.value_at(j, 5.0) == w.values.back());
    }
    const std::vector<double> grid{0.0, 2.5, 5.0};
    const RowMatrix m = ens.positions_at(grid);
    CHECK(m.rows() == 3);
    CHECK(m(1, 1) == ens.value_at(1, 2.5));
    CHECK_THROWS_AS(ens.positions_at(5.5), PreconditionError);
    CHECK_THROWS_AS(ens.positions_at(-0.1), PreconditionError);
}

TEST_CASE("FreeWalk replays simulate_free") {
    const RngStream replica = RngStream(21, {4, 0, 0}).replica(17);
    const std::vector<double> start{-1.0, 0.0, 3.0};
    const auto ens = simulate_free(3, start, 50.0, kGauss, replica);
    FreeWalk walk(start, kGauss, replica);
    walk.advance(50.0);
    const auto expected = ens.positions_at(50.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(walk.positions()[j] == expected[j]);

    FreeWalk chamber(start, kGauss, replica);
    const bool alive = chamber.advance_in_chamber(50.0);
    const auto tau = exit_time(ens);
    CHECK(alive == !tau.reached());
    if (tau.reached()) CHECK(*chamber.exit_time() == tau.time());
}

TEST_CASE("exit_time examples") {
    const auto e1 = single_jump({0.0, 1.0}, 10.0, 0, 2.0, 5.0);
    CHECK(exit_time(e1).time() == 2.0);
    const auto e2 = PathEnsemble({0.0, 1.0}, 10.0, {{}, {}});
    CHECK_FALSE(exit_time(e2).reached());
    CHECK(exit_time(e2).horizon() == 10.0);
    CHECK_THROWS_AS(exit_time(e2).time(), std::logic_error);
    CHECK(exit_time(PathEnsemble({1.0, 0.0}, 10.0, {{}, {}})).time() == 0.0);
    // a tie is an exit
    CHECK(exit_time(single_jump({0.0, 1.0}, 10.0, 0, 3.0, 1.0)).time() == 3.0);
}

TEST_CASE("exit_time is monotone under widening and the left limit is ordered") {
    const RngStream root(31, {5, 0, 0});
    for (std::uint64_t r = 0; r < 200; ++r) {
        const auto ens = simulate_free(3, std::vector<double>{0.0, 1.0, 2.0}, 20.0, kGauss, root.replica(r));
        const auto tau = exit_time(ens);
        if (tau.reached() && tau.time() > 0.0) {
            const auto before = ens.positions_at(std::nextafter(tau.time(), 0.0));
            CHECK(WeylPoint::is_ordered(before));
            CHECK_FALSE(WeylPoint::is_ordered(ens.positions_at(tau.time())));
        }
        for (int split = 1; split < 3; ++split) {
            std::vector<double> start(ens.start().begin(), ens.start().end());
            std::vector<WalkerEvents> walkers;
            for (int j = 0; j < 3; ++j) {
                WalkerEvents w = ens.walker(j);
                const double c = j >= split ? 0.5 : 0.0;
                for (double& v : w.values) v += c;
                start[static_cast<std::size_t>(j)] += c;
                walkers.push_back(std::move(w));
            }
            const auto wider = exit_time(PathEnsemble(start, 20.0, std::move(walkers)));
            if (tau.reached() && wider.reached()) CHECK(wider.time() >= tau.time());
            if (!tau.reached()) CHECK_FALSE(wider.reached());
        }
    }
}

TEST_CASE("hitting_time_W_eps examples") {
    const double t = 100.0, eps = 0.25;
    const double thr = w_eps_threshold(t, eps);
    CHECK(hitting_time_W_eps(PathEnsemble({0.0, 2 * thr}, 10.0, {{}, {}}), t, eps).time() == 0.0);
    CHECK_FALSE(hitting_time_W_eps(PathEnsemble({0.0, thr / 2}, 10.0, {{}, {}}), t, eps).reached());
    const auto widened = single_jump({0.0, thr / 2}, 10.0, 1, 3.7, thr);
    CHECK(hitting_time_W_eps(widened, t, eps).time() == 3.7);
    CHECK_THROWS_AS(hitting_time_W_eps(widened, 1.0, eps), PreconditionError);
    CHECK_THROWS_AS(hitting_time_W_eps(widened, t, 0.5), PreconditionError);
}

TEST_CASE("extrema") {
    const auto ens = PathEnsemble::from_increments({0.0, 1.0}, 10.0, {{1.0, 2.0}, {1.5, 2.5}}, {{-1.0, 3.0}, {1.0, 1.0}});
    const auto e0 = extrema(ens, 0.0);
    CHECK(e0.top_max == 1.0);
    CHECK(e0.bottom_min == 0.0);
    const auto e = extrema(ens, 10.0);
    CHECK(e.top_max == ens.value_at(1, 10.0));  // increasing top path
    CHECK(e.bottom_min == -1.0);
    CHECK_THROWS_AS(extrema(ens, 11.0), PreconditionError);
}

TEST_CASE("running maximum matches the reflection value") {
    // E[M(t)] = E|B(t)| = sqrt(2t/pi) for the Brownian proxy.
    const RngStream root(41, {6, 0, 0});
    const double t = 1e3;
    const auto acc = reduce_replicas<Accumulator>(10000, [&](Accumulator& a, std::uint64_t r) {
        a.add(extrema(simulate_free(1, std::vector<double>{0.0}, t, kGauss, root.replica(r)), t).top_max);
    });
    CHECK(std::abs(acc.mean() / std::sqrt(2 * t / std::numbers::pi) - 1.0) < 0.1);
}

TEST_CASE("jump counts are Poisson(t)") {
    const RngStream root(51, {7, 0, 0});
    const double t = 10.0;
    const std::uint64_t n = 100000;
    constexpr int kMax = 25;
    std::vector<double> observed(kMax + 1, 0.0);
    for (std::uint64_t r = 0; r < n; ++r) {
        const auto ens = simulate_free(1, std::vector<double>{0.0}, t, kGauss, root.replica(r));
        observed[std::min<std::size_t>(ens.total_events(), kMax)] += 1.0;
    }
    const boost::math::poisson_distribution<> pois(t);
    double stat = 0.0;
    int bins = 0;
    for (int k = 0; k <= kMax; ++k) {
        const double p = k < kMax ? boost::math::pdf(pois, k) : boost::math::cdf(boost::math::complement(pois, kMax - 1));
        const double expected = p * static_cast<double>(n);
        if (expected < 5.0) continue;
        stat += (observed[static_cast<std::size_t>(k)] - expected) * (observed[static_cast<std::size_t>(k)] - expected) / expected;
        ++bins;
    }
    const boost::math::chi_squared_distribution<> chi(bins - 1);
    CHECK(boost::math::cdf(boost::math::complement(chi, stat)) > 0.001);
}

TEST_CASE("repulsion_probe trivial cases") {
    const RngStream root(61, {8, 0, 0});
    const std::vector<double> ts{100.0, 400.0};
    for (const auto& e : repulsion_probe(std::vector<double>{0.0}, kGauss, ts, 0.25, 1000, root)) CHECK(e.mean == 0.0);
    const double wide = 10.0 * w_eps_threshold(400.0, 0.25);
    for (const auto& e : repulsion_probe(std::vector<double>{0.0, wide}, kGauss, ts, 0.25, 10000, root))
        CHECK(e.mean == 0.0);
    CHECK_THROWS_AS(repulsion_probe(std::vector<double>{0.0, 1.0}, kGauss, ts, 0.5, 10, root), PreconditionError);
}

TEST_CASE("path CSV dump") {
    const auto ens = PathEnsemble::from_increments({0.0, 1.0}, 10.0, {{1.0}, {}}, {{0.25}, {}});
    const std::string path = "/tmp/owl_test_path.csv";
    write_path_csv(ens, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "walker,jump_time,value\n1,0,0\n1,1,0.25\n2,0,1\n");
}
