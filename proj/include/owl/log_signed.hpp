#pragma once

#include <cmath>
#include <limits>

namespace owl {

/// Sign plus natural-log magnitude. Carries products of many spacing factors
/// (Vandermonde-type products) without overflow.
class LogSignedValue {
  public:
    constexpr LogSignedValue() = default;

    static LogSignedValue zero() { return {}; }
    static LogSignedValue one() { return from_log(+1, 0.0); }
    static LogSignedValue from_log(int sign, double log_magnitude);
    static LogSignedValue from_real(double x);

    int sign() const { return sign_; }
    /// -inf when sign() == 0.
    double log_magnitude() const { return sign_ == 0 ? -std::numeric_limits<double>::infinity() : log_; }
    bool is_zero() const { return sign_ == 0; }

    double to_real() const { return sign_ == 0 ? 0.0 : sign_ * std::exp(log_); }

    LogSignedValue& operator*=(const LogSignedValue& other);
    LogSignedValue& operator/=(const LogSignedValue& other);
    LogSignedValue& operator+=(const LogSignedValue& other);
    LogSignedValue& operator-=(const LogSignedValue& other) { return *this += -other; }
    LogSignedValue operator-() const { return from_log(-sign_, log_); }

    friend LogSignedValue operator*(LogSignedValue a, const LogSignedValue& b) { return a *= b; }
    friend LogSignedValue operator/(LogSignedValue a, const LogSignedValue& b) { return a /= b; }
    friend LogSignedValue operator+(LogSignedValue a, const LogSignedValue& b) { return a += b; }
    friend LogSignedValue operator-(LogSignedValue a, const LogSignedValue& b) { return a -= b; }

    friend bool operator==(const LogSignedValue& a, const LogSignedValue& b) {
        return a.sign_ == b.sign_ && (a.sign_ == 0 || a.log_ == b.log_);
    }
    friend bool operator<(const LogSignedValue& a, const LogSignedValue& b);

  private:
    int sign_ = 0;
    double log_ = 0.0;
};

}  // namespace owl
