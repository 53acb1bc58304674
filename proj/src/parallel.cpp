#include "kten/parallel.hpp"

#include <atomic>
#include <mutex>

namespace kten {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads; }

void parallel_chunks(std::size_t nchunks, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::size_t(thread_count()), nchunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) body(c);
    return;
  }
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < nchunks; c += workers) body(c);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace kten
