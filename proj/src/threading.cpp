#include "df/threading.hpp"

#include <algorithm>

namespace df {

namespace {
std::atomic<int> g_threads{0};
thread_local bool t_in_worker = false;
}  // namespace

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() {
  int n = g_threads.load();
  if (n == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    n = hc == 0 ? 1 : static_cast<int>(hc);
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  int workers = thread_count();
  if (t_in_worker || workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::size_t chunk = (n + w - 1) / w;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      t_in_worker = true;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
      t_in_worker = false;
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace df
