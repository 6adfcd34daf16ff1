#include "doctest_main.hpp"

#include <cmath>

#include "owl/log_signed.hpp"
#include "owl/rng.hpp"

using owl::LogSignedValue;

TEST_CASE("round trip through real values") {
    for (double x : {1.0, -2.5, 1e-300, -1e300, 3.0e5}) CHECK(LogSignedValue::from_real(x).to_real() == doctest::Approx(x));
    CHECK(LogSignedValue::from_real(0.0).sign() == 0);
    CHECK(LogSignedValue::from_real(0.0).to_real() == 0.0);
}

TEST_CASE("products compose signs and add log magnitudes") {
    const auto a = LogSignedValue::from_real(-3.0);
    const auto b = LogSignedValue::from_real(4.0);
    CHECK((a * b).to_real() == doctest::Approx(-12.0));
    CHECK((a / b).to_real() == doctest::Approx(-0.75));
    CHECK((a * LogSignedValue::zero()).is_zero());
    CHECK_THROWS((a / LogSignedValue::zero()));
    // Far beyond double range.
    LogSignedValue big = LogSignedValue::one();
    for (int i = 0; i < 100; ++i) big *= LogSignedValue::from_real(1e10);
    CHECK(big.log_magnitude() == doctest::Approx(1000 * std::log(10.0)));
    CHECK(big.sign() == 1);
}

TEST_CASE("signed log-sum-exp addition") {
    owl::RngStream s(3);
    for (int i = 0; i < 2000; ++i) {
        const double x = 100 * (s.uniform() - 0.5);
        const double y = 100 * (s.uniform() - 0.5);
        const auto sum = LogSignedValue::from_real(x) + LogSignedValue::from_real(y);
        REQUIRE(sum.to_real() == doctest::Approx(x + y).epsilon(1e-9).scale(100));
        const auto diff = LogSignedValue::from_real(x) - LogSignedValue::from_real(y);
        REQUIRE(diff.to_real() == doctest::Approx(x - y).epsilon(1e-9).scale(100));
    }
    const auto v = LogSignedValue::from_real(5.0);
    CHECK((v - v).is_zero());
    CHECK((v + LogSignedValue::zero()) == v);
}

TEST_CASE("ordering") {
    CHECK(LogSignedValue::from_real(-5) < LogSignedValue::from_real(-1));
    CHECK(LogSignedValue::from_real(-1) < LogSignedValue::zero());
    CHECK(LogSignedValue::zero() < LogSignedValue::from_real(1e-200));
    CHECK(LogSignedValue::from_real(2) < LogSignedValue::from_real(3));
}
