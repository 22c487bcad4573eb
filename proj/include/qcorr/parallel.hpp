#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qcorr {

// Evaluates f(0..n-1) on up to `jobs` threads. Results are stored by index,
// so the output never depends on scheduling. The first exception is rethrown.
template <class F>
auto parallel_map(std::size_t n, unsigned jobs, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            out[i] = f(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!err) err = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace qcorr
