#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rtdbscan {

/// Monotonic wall clock reporting milliseconds.
class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}

  void reset() { start_ = std::chrono::steady_clock::now(); }

  double elapsed_ms() const {
    const auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

/// Runs `body(worker, begin, end)` over [0, n) in dynamically scheduled chunks.
/// With `threads <= 1` the whole range runs on the calling thread in order.
template <class Body>
void parallel_for_chunks(std::size_t n, unsigned threads, Body&& body, std::size_t chunk = 256) {
  if (n == 0) return;
  if (threads <= 1 || n <= chunk) {
    body(0u, std::size_t{0}, n);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, (n + chunk - 1) / chunk));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto run = [&](unsigned worker) {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk, std::memory_order_relaxed);
        if (begin >= n) break;
        body(worker, begin, std::min(n, begin + chunk));
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n, std::memory_order_relaxed);
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Number of worker slots `parallel_for_chunks` may use for the given request.
inline unsigned worker_slots(unsigned threads) { return std::max(1u, threads); }

}  // namespace rtdbscan
