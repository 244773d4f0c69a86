#pragma once

// Deterministic data parallelism. parallel_for partitions an index range into
// contiguous blocks; each index writes only its own output slot, so results
// are bitwise identical for any thread count, including 1.

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace covsel {

inline unsigned effective_threads(unsigned requested) {
  if (requested == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
  }
  return requested;
}

template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = effective_threads(threads);
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  if (threads > n) threads = static_cast<unsigned>(n);

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end) break;
    workers.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace covsel
