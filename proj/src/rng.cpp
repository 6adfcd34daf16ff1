#include "owl/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace owl {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

std::array<std::uint32_t, 2> derive_key(std::uint64_t seed, std::uint32_t experiment) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(0x6f776c00u + std::uint64_t{experiment}));
    return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, StreamPath path)
    : seed_(seed), path_(path), key_(derive_key(seed, path.experiment)) {}

RngStream RngStream::replica(std::uint64_t index) const {
    StreamPath p = path_;
    p.replica = index;
    p.lane = 0;
    return RngStream(seed_, p);
}

RngStream RngStream::lane(std::uint32_t lane) const {
    StreamPath p = path_;
    p.lane = lane;
    return RngStream(seed_, p);
}

RngStream RngStream::experiment(std::uint32_t experiment) const {
    return RngStream(seed_, StreamPath{experiment, 0, 0});
}

void RngStream::refill() {
    const std::array<std::uint32_t, 4> ctr{
        block_, path_.lane, static_cast<std::uint32_t>(path_.replica),
        static_cast<std::uint32_t>(path_.replica >> 32)};
    buffer_ = philox4x32(ctr, key_);
    ++block_;
    used_ = 0;
}

std::uint32_t RngStream::next_u32() {
    if (used_ == 4) refill();
    return buffer_[used_++];
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double RngStream::uniform() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

double RngStream::exponential() { return -std::log(uniform()); }

std::uint64_t RngStream::below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection of the biased low band.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = next_u64();
        const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
        if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
}

std::string RngStream::fingerprint() const { return fingerprint_of(seed_, path_.experiment); }

std::string fingerprint_of(std::uint64_t seed, std::uint32_t experiment) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(seed ^ (std::uint64_t{experiment} << 40))));
    return buf;
}

}  // namespace owl
