#include "owl/log_signed.hpp"

#include <stdexcept>

namespace owl {

LogSignedValue LogSignedValue::from_log(int sign, double log_magnitude) {
    LogSignedValue v;
    if (sign == 0 || log_magnitude == -std::numeric_limits<double>::infinity()) return v;
    if (std::isnan(log_magnitude)) throw std::domain_error("LogSignedValue: NaN log-magnitude");
    v.sign_ = sign > 0 ? 1 : -1;
    v.log_ = log_magnitude;
    return v;
}

LogSignedValue LogSignedValue::from_real(double x) {
    if (std::isnan(x)) throw std::domain_error("LogSignedValue: NaN");
    if (x == 0.0) return {};
    return from_log(x > 0 ? 1 : -1, std::log(std::abs(x)));
}

LogSignedValue& LogSignedValue::operator*=(const LogSignedValue& other) {
    sign_ *= other.sign_;
    log_ = sign_ == 0 ? 0.0 : log_ + other.log_;
    return *this;
}

LogSignedValue& LogSignedValue::operator/=(const LogSignedValue& other) {
    if (other.sign_ == 0) throw std::domain_error("LogSignedValue: division by zero");
    sign_ *= other.sign_;
    log_ = sign_ == 0 ? 0.0 : log_ - other.log_;
    return *this;
}

LogSignedValue& LogSignedValue::operator+=(const LogSignedValue& other) {
    if (other.sign_ == 0) return *this;
    if (sign_ == 0) return *this = other;
    const double hi = std::max(log_, other.log_);
    const double lo = std::min(log_, other.log_);
    const int hi_sign = log_ >= other.log_ ? sign_ : other.sign_;
    if (sign_ == other.sign_) {
        log_ = hi + std::log1p(std::exp(lo - hi));
        sign_ = hi_sign;
        return *this;
    }
    // Opposite signs: magnitude is e^hi (1 - e^{lo - hi}).
    if (lo == hi) return *this = LogSignedValue{};
    log_ = hi + std::log1p(-std::exp(lo - hi));
    sign_ = hi_sign;
    return *this;
}

bool operator<(const LogSignedValue& a, const LogSignedValue& b) {
    if (a.sign_ != b.sign_) return a.sign_ < b.sign_;
    if (a.sign_ == 0) return false;
    return a.sign_ > 0 ? a.log_ < b.log_ : a.log_ > b.log_;
}

}  // namespace owl
