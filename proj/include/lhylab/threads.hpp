#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

#include "lhylab/ksum.hpp"

namespace lhylab {

// Worker cap: LHY_LAB_THREADS if set, else hardware concurrency, at least 1.
inline unsigned thread_cap() {
  if (const char* env = std::getenv("LHY_LAB_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1u;
}

// Maps fn over fixed-size index chunks and folds the per-chunk partials in
// chunk order. Chunk boundaries do not depend on the worker count, so the
// result is bit-identical for any level of parallelism.
//
// fn(begin, end, Kahan&) must accumulate deterministically within its chunk.
inline Kahan chunked_sum(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t, std::int64_t, Kahan&)>& fn,
                         std::int64_t chunk = 1 << 16) {
  if (end <= begin) return {};
  const std::int64_t n_chunks = (end - begin + chunk - 1) / chunk;
  std::vector<Kahan> partial(static_cast<std::size_t>(n_chunks));

  unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(n_chunks));
  if (workers <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      std::int64_t lo = begin + c * chunk;
      fn(lo, std::min(end, lo + chunk), partial[static_cast<std::size_t>(c)]);
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::int64_t c = w; c < n_chunks; c += workers) {
          std::int64_t lo = begin + c * chunk;
          fn(lo, std::min(end, lo + chunk), partial[static_cast<std::size_t>(c)]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  Kahan total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace lhylab
