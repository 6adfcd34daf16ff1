#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <type_traits>
#include <vector>

#include "owl/estimate.hpp"

namespace owl {

/// Replicas per reduction chunk. Chunk k always covers absolute replica
/// indices [k * kChunkSize, (k + 1) * kChunkSize), whatever the thread count.
inline constexpr std::uint64_t kChunkSize = 1024;

/// Worker count used when a caller does not pass one: set_default_threads(),
/// else $OWL_THREADS, else 1.
unsigned default_threads();
void set_default_threads(unsigned threads);

/// Calls task(i) for i in [0, count) on up to `threads` workers. Tasks must
/// write only to state owned by index i. The first exception is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task,
                  unsigned threads = 0);

/// Per-chunk partial reductions over replicas [first, first + n), in chunk order.
template <class Acc, class Body>
std::vector<Acc> chunked_reduce(std::uint64_t first, std::uint64_t n, Body&& body,
                                unsigned threads = 0) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
    for (std::uint64_t lo = first; lo < first + n;) {
        const std::uint64_t hi = std::min(first + n, (lo / kChunkSize + 1) * kChunkSize);
        ranges.emplace_back(lo, hi);
        lo = hi;
    }
    std::vector<Acc> partial(ranges.size());
    parallel_for(
        ranges.size(),
        [&](std::size_t k) {
            for (std::uint64_t r = ranges[k].first; r < ranges[k].second; ++r) body(partial[k], r);
        },
        threads);
    return partial;
}

/// Left fold with Acc::merge, in order.
template <class Acc>
Acc fold(const std::vector<Acc>& parts) {
    Acc total{};
    for (const Acc& p : parts) total.merge(p);
    return total;
}

struct ChunkPartial {
    std::uint64_t chunk = 0;
    Accumulator acc;
};

/// While alive, reduce_replicas covers replicas [offset, offset + n) and the
/// per-chunk partials of every Accumulator reduction are recorded. One scope
/// at a time; intended for sharded command-line runs.
class ShardScope {
  public:
    explicit ShardScope(std::uint64_t offset);
    ~ShardScope();
    ShardScope(const ShardScope&) = delete;
    ShardScope& operator=(const ShardScope&) = delete;

    std::uint64_t offset() const { return offset_; }
    const std::vector<ChunkPartial>& partials() const { return partials_; }
    void record(std::uint64_t first, const std::vector<Accumulator>& parts);

  private:
    std::uint64_t offset_;
    std::vector<ChunkPartial> partials_;
};

ShardScope* active_shard();

template <class Acc, class Body>
Acc reduce_replicas(std::uint64_t n, Body&& body, unsigned threads = 0) {
    ShardScope* shard = active_shard();
    const std::uint64_t first = shard ? shard->offset() : 0;
    auto parts = chunked_reduce<Acc>(first, n, std::forward<Body>(body), threads);
    if constexpr (std::is_same_v<Acc, Accumulator>)
        if (shard) shard->record(first, parts);
    return fold(parts);
}

/// Several accumulators advanced together per replica.
template <std::size_t K>
struct AccumulatorSet {
    std::array<Accumulator, K> acc{};

    Accumulator& operator[](std::size_t i) { return acc[i]; }
    const Accumulator& operator[](std::size_t i) const { return acc[i]; }

    void merge(const AccumulatorSet& other) {
        for (std::size_t i = 0; i < K; ++i) acc[i].merge(other.acc[i]);
    }
};

}  // namespace owl
