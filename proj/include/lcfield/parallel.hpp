#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lcf {

// Worker count from LCFIELD_THREADS (0 or unset = hardware concurrency).
inline unsigned worker_count() {
  static const unsigned n = [] {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("LCFIELD_THREADS");
    if (!env || !*env) return hw;
    long v = std::strtol(env, nullptr, 10);
    if (v <= 0) return hw;
    return static_cast<unsigned>(v);
  }();
  return n;
}

// Runs fn(begin, end) over [0, n) in contiguous chunks. Work items must be
// independent; results are bitwise identical for any worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t grain = 1u << 14) {
  unsigned w = worker_count();
  if (w <= 1 || n < 2 * grain) {
    fn(std::size_t{0}, n);
    return;
  }
  std::size_t chunks = std::min<std::size_t>(w, (n + grain - 1) / grain);
  std::size_t step = (n + chunks - 1) / chunks;
  std::vector<std::jthread> pool;
  pool.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    std::size_t b = c * step, e = std::min(n, b + step);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, step));
}

}  // namespace lcf
