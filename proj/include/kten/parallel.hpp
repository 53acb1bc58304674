#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace kten {

// Process-wide worker count; set once by the CLI before any computation.
void set_thread_count(int n);
int thread_count();

// Runs body(chunk) for chunk in [0, nchunks). Chunks are assigned round-robin
// to workers; callers must make each chunk's output depend only on its index
// so that results do not change with the worker count.
void parallel_chunks(std::size_t nchunks, const std::function<void(std::size_t)>& body);

// Fixed-size chunked sum: the reduction order is independent of thread count.
template <class F>
double deterministic_sum(std::size_t n, std::size_t chunk, F&& term) {
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_chunks(nchunks, [&](std::size_t c) {
    double s = 0.0;
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace kten
