#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace owl {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Address of an independent random stream: (experiment, replica, lane).
///
/// The lane is the walker index for path simulation; other consumers use
/// tagged lanes (see `lanes` below) so that every draw in a run has a unique
/// address independent of how replicas are scheduled.
struct StreamPath {
    std::uint32_t experiment = 0;
    std::uint64_t replica = 0;
    std::uint32_t lane = 0;

    friend bool operator==(const StreamPath&, const StreamPath&) = default;
};

namespace lanes {
inline constexpr std::uint32_t kZeta = 0x4000'0000u;    // + index of ζ draw
inline constexpr std::uint32_t kScalar = 0x5000'0000u;  // single-stream consumers
inline constexpr std::uint32_t kMatrix = 0x6000'0000u;  // matrix-model noise
inline constexpr std::uint32_t kPaired = 0x7000'0000u;  // second system of a pair

/// Walker lane for SMC generation `generation` (re-keyed after each resampling).
constexpr std::uint32_t walker(std::uint32_t generation, std::uint32_t j) {
    return (generation << 16) | (j & 0xffffu);
}
}  // namespace lanes

/// Counter-based random stream keyed by (seed, StreamPath).
///
/// Value-semantic: copying a stream copies its position, so a copy replays the
/// same draws. Derive new streams with `replica()`/`lane()` instead of sharing.
class RngStream {
  public:
    RngStream(std::uint64_t seed, StreamPath path);
    explicit RngStream(std::uint64_t seed) : RngStream(seed, StreamPath{}) {}

    RngStream replica(std::uint64_t index) const;
    RngStream lane(std::uint32_t lane) const;
    RngStream experiment(std::uint32_t experiment) const;

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform();
    double normal();
    /// Exp(1).
    double exponential();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::uint64_t seed() const { return seed_; }
    const StreamPath& path() const { return path_; }

    /// Opaque id of (seed, experiment); identical for every replica of a run.
    std::string fingerprint() const;

  private:
    void refill();

    std::uint64_t seed_;
    StreamPath path_;
    std::array<std::uint32_t, 2> key_{};
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    unsigned used_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::string fingerprint_of(std::uint64_t seed, std::uint32_t experiment);

}  // namespace owl
