#include "owl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace owl {
namespace {

std::atomic<unsigned> g_threads{0};
ShardScope* g_shard = nullptr;

unsigned threads_from_env() {
    if (const char* env = std::getenv("OWL_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

}  // namespace

unsigned default_threads() {
    const unsigned t = g_threads.load();
    return t > 0 ? t : threads_from_env();
}

void set_default_threads(unsigned threads) { g_threads.store(threads); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task,
                  unsigned threads) {
    if (threads == 0) threads = default_threads();
    const std::size_t workers = std::min<std::size_t>(threads, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

ShardScope::ShardScope(std::uint64_t offset) : offset_(offset) {
    if (g_shard) throw std::logic_error("ShardScope: a scope is already active");
    g_shard = this;
}

ShardScope::~ShardScope() { g_shard = nullptr; }

void ShardScope::record(std::uint64_t first, const std::vector<Accumulator>& parts) {
    for (std::size_t k = 0; k < parts.size(); ++k) partials_.push_back({first / kChunkSize + k, parts[k]});
}

ShardScope* active_shard() { return g_shard; }

}  // namespace owl
