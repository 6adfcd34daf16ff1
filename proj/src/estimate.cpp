#include "owl/estimate.hpp"

namespace owl {

void Accumulator::merge(const Accumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double total = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / total;
    m2_ += other.m2_ + delta * delta * na * nb / total;
    n_ += other.n_;
}

MCEstimate Accumulator::estimate(std::string fingerprint) const {
    const double se = n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    return {mean_, se, n_, std::move(fingerprint), std::nullopt};
}

MCEstimate merge(const MCEstimate& a, const MCEstimate& b) {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    const double na = static_cast<double>(a.n);
    const double nb = static_cast<double>(b.n);
    const double total = na + nb;
    const double m2a = a.se * a.se * na * (na - 1.0);
    const double m2b = b.se * b.se * nb * (nb - 1.0);
    const double delta = b.mean - a.mean;
    const double mean = a.mean + delta * nb / total;
    const double m2 = m2a + m2b + delta * delta * na * nb / total;
    const double se = total > 1.0 ? std::sqrt(m2 / (total - 1.0) / total) : 0.0;
    return {mean, se, a.n + b.n, a.seed_fingerprint, a.horizon};
}

}  // namespace owl
