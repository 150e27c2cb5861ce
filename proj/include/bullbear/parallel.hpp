#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bullbear {

// Index-parallel loop with a bounded worker count. Work items write results
// into caller-owned slots keyed by index, so output never depends on
// scheduling; the lowest-index exception wins for deterministic reporting.
inline void parallel_for(std::size_t n, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::pair<std::size_t, std::exception_ptr>> errors;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        errors.emplace_back(i, std::current_exception());
      }
    }
  };
  std::vector<std::thread> threads;
  int workers = std::min<std::size_t>(std::size_t(jobs), n);
  threads.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (!errors.empty()) {
    auto first = errors.front();
    for (const auto& e : errors)
      if (e.first < first.first) first = e;
    std::rethrow_exception(first.second);
  }
}

}  // namespace bullbear
