#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace lsfm {

/// Runs body(k) for k in [0, n) on up to `threads` workers with a static
/// contiguous partition. If any call throws, the exception from the lowest
/// index is rethrown after all workers finish.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(static_cast<long>(n) * t / threads);
    const int end = static_cast<int>(static_cast<long>(n) * (t + 1) / threads);
    workers.emplace_back([&, begin, end] {
      for (int k = begin; k < end; ++k) {
        try {
          body(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lsfm
