#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fragmc {

/// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
///
/// The chunk partition depends only on (n, grain) — never on the worker
/// count — so callers that store per-chunk partial results and reduce them in
/// chunk order get bit-identical output at any parallelism level.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned jobs, std::size_t grain, Fn&& fn) {
  if (n == 0) return;
  if (grain == 0) grain = 1;
  const std::size_t n_chunks = (n + grain - 1) / grain;
  if (jobs <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      fn(c, c * grain, std::min(n, (c + 1) * grain));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      try {
        fn(c, c * grain, std::min(n, (c + 1) * grain));
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n_threads = std::min<std::size_t>(jobs, n_chunks);
  pool.reserve(n_threads);
  for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

constexpr std::size_t kDefaultGrain = 16384;

}  // namespace fragmc
