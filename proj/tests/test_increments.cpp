#include "doctest_main.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "owl/errors.hpp"
#include "owl/increments.hpp"

using namespace owl;

namespace {

// Test-side oracle: composite midpoint rule for ∫_a^b g.
template <class F>
double midpoint(F g, double a, double b, int cells = 400000) {
    const double h = (b - a) / cells;
    double s = 0.0;
    for (int i = 0; i < cells; ++i) s += g(a + (i + 0.5) * h);
    return s * h;
}

// E[ζ] = E[X | X > 0] - E[X | X < 0] + 1 by direct quadrature of the density.
double zeta_mean_oracle(const IncrementLaw& law, double lo, double hi) {
    auto f = [&](double x) { return law.density(x); };
    const double p_pos = midpoint(f, 0.0, hi);
    const double p_neg = midpoint(f, lo, 0.0);
    const double m_pos = midpoint([&](double x) { return x * f(x); }, 0.0, hi) / p_pos;
    const double m_neg = midpoint([&](double x) { return x * f(x); }, lo, 0.0) / p_neg;
    return m_pos - m_neg + 1.0;
}

std::string write_temp_csv(const std::string& name, const std::string& body) {
    const std::string path = "/tmp/owl_test_" + name + ".csv";
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_CASE("densities at reference points") {
    CHECK(IncrementLaw::gaussian().density(0.0) == doctest::Approx(0.3989422804));
    CHECK(IncrementLaw::centered_exponential().density(-1.0) == doctest::Approx(1.0));
    CHECK(IncrementLaw::centered_exponential().density(-1.0001) == 0.0);
    CHECK(IncrementLaw::laplace_normalized().density(0.0) == doctest::Approx(0.7071067812));
    CHECK(IncrementLaw::uniform_normalized().density(1.8) == 0.0);
}

TEST_CASE("built-in laws are centered, unit variance, normalized and log-concave") {
    for (const auto& law : IncrementLaw::builtin()) {
        CAPTURE(law.name());
        CHECK(std::abs(law.mean()) < 1e-8);
        CHECK(std::abs(law.variance() - 1.0) < 1e-8);
        CHECK(law.log_concave());
        CHECK(law.exp_moment_radius() > 0.0);
        const double lo = std::isfinite(law.support_lower()) ? law.support_lower() : -40.0;
        const double hi = std::isfinite(law.support_upper()) ? law.support_upper() : 40.0;
        const double mass = midpoint([&](double x) { return law.density(x); }, lo, hi);
        CHECK(std::abs(mass - 1.0) < 1e-6);
        // Midpoint log-concavity on pairs inside the support.
        const auto pts = linspace(lo + 1e-9, std::min(hi, 12.0) - 1e-9, 120);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double fu = law.density(pts[i]), fv = law.density(pts[j]);
                if (fu <= 0 || fv <= 0) continue;
                REQUIRE(std::log(law.density(0.5 * (pts[i] + pts[j]))) >=
                        0.5 * (std::log(fu) + std::log(fv)) - 1e-12);
            }
    }
}

TEST_CASE("sampling matches the moments of each family") {
    const std::uint64_t n = 1'000'000;
    for (const auto& law : IncrementLaw::builtin()) {
        CAPTURE(law.name());
        RngStream s(101);
        Accumulator m1, m2, m4;
        double lo = 1e300, hi = -1e300;
        for (std::uint64_t i = 0; i < n; ++i) {
            const double x = law.sample(s);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            m1.add(x);
            m2.add(x * x);
            m4.add(x * x * x * x);
        }
        const double se_mean = std::sqrt(m2.mean() / n);
        const double se_var = std::sqrt((m4.mean() - 1.0) / n);
        CHECK(std::abs(m1.mean()) < 4 * se_mean);
        CHECK(std::abs(m2.mean() - 1.0) < 4 * se_var);
        CHECK(lo >= law.support_lower());
        CHECK(hi <= law.support_upper());
        if (law.family() == LawFamily::gaussian) CHECK(std::abs(m1.mean()) < 3e-3);
        if (law.family() == LawFamily::centered_exponential) CHECK(std::abs(m1.variance() - 1.0) < 0.01);
    }
}

TEST_CASE("zeta draws are at least one and match the quadrature oracle") {
    const std::uint64_t n = 1'000'000;
    struct Case {
        IncrementLaw law;
        double lo, hi;
    };
    for (const auto& c : {Case{IncrementLaw::gaussian(), -40, 40}, Case{IncrementLaw::centered_exponential(), -1, 60},
                          Case{IncrementLaw::laplace_normalized(), -40, 40},
                          Case{IncrementLaw::uniform_normalized(), -std::sqrt(3.0), std::sqrt(3.0)}}) {
        CAPTURE(c.law.name());
        RngStream s(77);
        Accumulator acc;
        double min_draw = 1e300;
        for (std::uint64_t i = 0; i < n; ++i) {
            const double z = sample_zeta(c.law, s);
            min_draw = std::min(min_draw, z);
            acc.add(z);
        }
        CHECK(min_draw >= 1.0);
        const double oracle = zeta_mean_oracle(c.law, c.lo, c.hi);
        const auto est = acc.estimate();
        CHECK(std::abs(est.mean - oracle) < 3 * est.se);
        const auto [pos, neg] = conditional_means(c.law);
        CHECK(pos - neg + 1.0 == doctest::Approx(oracle).epsilon(1e-6));
    }
    CHECK(zeta_mean_oracle(IncrementLaw::gaussian(), -40, 40) ==
          doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi) + 1.0).epsilon(1e-9));
    CHECK(2.0 * std::sqrt(2.0 / std::numbers::pi) + 1.0 == doctest::Approx(2.5958).epsilon(1e-4));
}

TEST_CASE("signed parts have the requested sign") {
    const auto law = IncrementLaw::uniform_normalized();
    RngStream s(1);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(sample_signed_part(law, -1, s) < 0.0);
        REQUIRE(sample_signed_part(law, +1, s) > 0.0);
    }
}

TEST_CASE("zeta density: support, mass, mean and log-concavity") {
    const auto grid = linspace(0.0, 16.0, 2048);
    const auto g = zeta_density(IncrementLaw::gaussian(), grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] < 1.0) REQUIRE(g.values()[i] == 0.0);
    CHECK(std::abs(g.integral() - 1.0) < 1e-4);
    const double oracle = zeta_mean_oracle(IncrementLaw::gaussian(), -40, 40);
    CHECK(std::abs(g.mean() - oracle) < 1e-3);
    CHECK(g.is_log_concave(1e-7));

    const auto e = zeta_density(IncrementLaw::centered_exponential(), linspace(0.0, 24.0, 2048));
    CHECK(std::abs(e.mean() - zeta_mean_oracle(IncrementLaw::centered_exponential(), -1, 60)) < 1e-3);

    CHECK_THROWS_AS(zeta_density(IncrementLaw::gaussian(), linspace(1.5, 16.0, 512)), PreconditionError);
    CHECK_THROWS_AS(zeta_density(IncrementLaw::gaussian(), linspace(0.0, 3.0, 512)), PreconditionError);
}

TEST_CASE("lr_order_check reference cases") {
    const auto grid = linspace(0.0, 20.0, 1001);
    std::vector<double> e1, e2;
    for (double x : grid) {
        e1.push_back(std::exp(-x));
        e2.push_back(0.5 * std::exp(-x / 2));
    }
    const GridDensity exp1(grid, e1), exp_half(grid, e2);
    CHECK(lr_order_check(exp1, exp1, 0.0).holds);
    CHECK(lr_order_check(exp1, exp_half, 0.0).holds);
    CHECK_FALSE(lr_order_check(exp_half, exp1, 1e-12).holds);

    const auto unit = linspace(0.0, 1.0, 201);
    std::vector<double> flat(unit.size(), 1.0), wedge;
    for (double w : unit) wedge.push_back(2.0 * (1.0 - w));
    const auto r = lr_order_check(GridDensity(unit, flat), GridDensity(unit, wedge), 1e-12);
    CHECK_FALSE(r.holds);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->first < r.witness->second);

    CHECK_THROWS_AS(lr_order_check(exp1, GridDensity(unit, flat), 0.0), PreconditionError);
}

TEST_CASE("lr order is reflexive on arbitrary densities") {
    RngStream s(5);
    const auto grid = linspace(-3.0, 3.0, 300);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v;
        for (std::size_t i = 0; i < grid.size(); ++i) v.push_back(s.uniform());
        const GridDensity f(grid, v);
        REQUIRE(lr_order_check(f, f, 0.0).holds);
    }
}

TEST_CASE("conditioned tails are lr-dominated by zeta for log-concave laws") {
    const std::vector<double> thetas{0.0, 0.5, 1.0, 2.0};
    const auto grid = linspace(0.0, 24.0, 2048);
    for (const auto& law : IncrementLaw::builtin()) {
        CAPTURE(law.name());
        const auto report = conditional_tail_lr_check(law, thetas, grid);
        CHECK(report.size() == 2 * thetas.size());
        for (const auto& e : report) {
            CAPTURE(e.theta);
            CAPTURE(e.side);
            if (e.skipped) continue;
            CHECK(e.result.holds);
            CHECK(e.refined.holds);
        }
    }
    // Uniform has no mass beyond sqrt(3) and centered exponential none below -1.
    const auto u = conditional_tail_lr_check(IncrementLaw::uniform_normalized(), thetas, grid);
    CHECK(u.back().skipped);
    const auto c = conditional_tail_lr_check(IncrementLaw::centered_exponential(), std::vector<double>{1.0}, grid);
    CHECK(c[1].skipped);
    CHECK_FALSE(c[0].skipped);
}

TEST_CASE("lr order implies empirical stochastic dominance") {
    // U = X | X > 0 is lr-below ζ, so P(U <= x) >= P(ζ <= x) for every x.
    const auto law = IncrementLaw::gaussian();
    RngStream s(12);
    const int n = 100000;
    std::vector<double> us, ws;
    for (int i = 0; i < n; ++i) {
        us.push_back(sample_signed_part(law, +1, s));
        ws.push_back(sample_zeta(law, s));
    }
    std::sort(us.begin(), us.end());
    std::sort(ws.begin(), ws.end());
    const double dkw = std::sqrt(std::log(2.0 / 0.05) / (2.0 * n));
    for (double x = 0.0; x < 8.0; x += 0.05) {
        const double fu = static_cast<double>(std::upper_bound(us.begin(), us.end(), x) - us.begin()) / n;
        const double fw = static_cast<double>(std::upper_bound(ws.begin(), ws.end(), x) - ws.begin()) / n;
        REQUIRE(fu >= fw - 3 * dkw);
    }
}

TEST_CASE("phi inequality estimates") {
    const auto law = IncrementLaw::gaussian();
    const RngStream root(31);
    const auto trivial = phi_inequality_check(law, 0, 0, 1000, root);
    CHECK(trivial.mean == 1.0);
    CHECK(trivial.se == 0.0);
    for (auto [p, q] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{3, 3}}) {
        const auto e = phi_inequality_check(law, p, q, 200000, root);
        CHECK(e.mean >= -3 * e.se);
        CHECK(e.n == 200000);
    }
    // p = 1, q = 0 equals E[ζ] - E[X | X > 0] = sqrt(2/π) + 1 exactly.
    const auto e10 = phi_inequality_check(law, 1, 0, 200000, root);
    CHECK(std::abs(e10.mean - (std::sqrt(2.0 / std::numbers::pi) + 1.0)) < 4 * e10.se);
}

TEST_CASE("custom densities from CSV") {
    const auto ok = write_temp_csv("tri", "x,f\n-1,0\n0,1\n1,0\n");
    const auto law = IncrementLaw::from_name("csv:" + ok);
    CHECK(law.family() == LawFamily::custom_grid);
    CHECK(std::abs(law.mean()) < 1e-12);
    CHECK(std::abs(law.variance() - 1.0) < 1e-12);
    CHECK(law.log_concave());
    CHECK(law.density(100.0) == 0.0);
    RngStream s(3);
    Accumulator acc;
    for (int i = 0; i < 200000; ++i) acc.add(law.sample(s));
    CHECK(std::abs(acc.mean()) < 4 * acc.estimate().se);
    CHECK(std::abs(acc.variance() - 1.0) < 0.02);

    const auto bad = write_temp_csv("bad", "x,f\n0,1\n0,1\n1,0\n");
    CHECK_THROWS_AS(IncrementLaw::from_name("csv:" + bad), PreconditionError);
    const auto header = write_temp_csv("hdr", "a,b\n0,1\n1,1\n");
    CHECK_THROWS_AS(IncrementLaw::from_name("csv:" + header), PreconditionError);
    CHECK_THROWS_AS(IncrementLaw::from_name("cauchy"), PreconditionError);
}

TEST_CASE("tabulated gaussian reproduces the built-in zeta density") {
    const auto xs = linspace(-9.0, 9.0, 3601);
    std::vector<double> fs;
    for (double x : xs) fs.push_back(std::exp(-0.5 * x * x));
    const auto tab = IncrementLaw::custom(GridDensity(xs, fs));
    const auto grid = linspace(0.0, 24.0, 2401);
    const auto exact = zeta_density(IncrementLaw::gaussian(), grid);
    const auto approx = zeta_density(tab, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        worst = std::max(worst, std::abs(exact.values()[i] - approx.values()[i]));
    CHECK(worst < 1e-4);
}

TEST_CASE("a far bump breaks the tail order") {
    const auto xs = linspace(-6.0, 10.0, 1601);
    std::vector<double> fs;
    for (double x : xs) fs.push_back(0.97 * std::exp(-0.5 * x * x) + 0.1 * std::exp(-0.5 * std::pow((x - 6.0) / 0.3, 2)));
    const auto law = IncrementLaw::custom(GridDensity(xs, fs));
    CHECK_FALSE(law.log_concave());
    const std::vector<double> thetas{0.0};
    const auto entries = conditional_tail_lr_check(law, thetas, linspace(0.0, 24.0, 2048));
    REQUIRE(entries.size() == 2);
    CHECK_FALSE(entries[0].result.holds);
    REQUIRE(entries[0].result.witness);
    CHECK(entries[0].result.witness->first <= entries[0].result.witness->second);
}

TEST_CASE("grid density evaluation outside support is zero") {
    const GridDensity f(linspace(0.0, 1.0, 11), std::vector<double>(11, 1.0));
    CHECK(f(-0.1) == 0.0);
    CHECK(f(1.1) == 0.0);
    CHECK(f(0.55) == doctest::Approx(1.0));
    CHECK(f.integral() == doctest::Approx(1.0));
}
