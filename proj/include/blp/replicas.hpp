#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace blp {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, replica index, tag). Streams depend
/// only on these three numbers, never on scheduling.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t replica, std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(replica),     static_cast<std::uint32_t>(replica >> 32),
                    static_cast<std::uint32_t>(tag),         static_cast<std::uint32_t>(tag >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline unsigned default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(replica_index, rng) for every replica, possibly concurrently, and
/// returns the results in replica order. Each replica owns its RNG stream, so
/// the output is bit-identical for any thread count.
template <class Result, class Fn>
std::vector<Result> run_replicas(std::size_t n, std::uint64_t seed, Fn&& fn, std::uint64_t tag = 0,
                                 unsigned threads = 0) {
  std::vector<Result> out(n);
  if (threads == 0) threads = default_thread_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        Rng rng = make_stream(seed, i, tag);
        out[i] = fn(i, rng);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace blp
