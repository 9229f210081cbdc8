#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lhylab/errors.hpp"
#include "lhylab/ksum.hpp"
#include "lhylab/partition.hpp"
#include "lhylab/quadrature.hpp"
#include "lhylab/threads.hpp"

namespace lhylab {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kTwoPiSq = 4.0 * M_PI * M_PI;

// Shell table of the integer lattice: counts[n] = r3(n) = #{z in Z^3 : |z|^2 = n}.
// Momenta live on 2*pi*Z^3, so the squared norm of shell n is (2*pi)^2 * n.
struct ShellIndex {
  std::int64_t max_n = -1;
  std::vector<std::uint32_t> counts;

  std::uint32_t r3(std::int64_t n) const {
    return (n >= 0 && n <= max_n) ? counts[static_cast<std::size_t>(n)] : 0u;
  }

  // #{z : |z|^2 <= m}
  std::int64_t ball_count(std::int64_t m) const {
    require(m <= max_n, "ball_count: beyond table");
    std::int64_t c = 0;
    for (std::int64_t n = 0; n <= m; ++n) c += counts[static_cast<std::size_t>(n)];
    return c;
  }
};

// Builds r3 up to max_n through the two-square convolution
//   r3(n) = sum_j r2(n - j^2) * (j == 0 ? 1 : 2),
// which streams linearly through memory. Cost O(max_n^{3/2}), memory 8 bytes
// per shell while building.
inline ShellIndex shell_counts(std::int64_t max_n, std::size_t memory_budget_bytes = (std::size_t{1} << 31)) {
  require(max_n >= 0, "shell_counts: max_n must be nonnegative");
  const std::size_t need = 8u * static_cast<std::size_t>(max_n + 1);
  if (need > memory_budget_bytes)
    throw certificate_error("shell_counts memory budget (bytes)", static_cast<double>(need),
                            static_cast<double>(memory_budget_bytes));

  const std::size_t size = static_cast<std::size_t>(max_n + 1);
  std::vector<std::uint32_t> r2(size, 0u);
  {
    const std::int64_t amax = static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n)));
    for (std::int64_t a = 0; a <= amax; ++a) {
      const std::int64_t a2 = a * a;
      if (a2 > max_n) break;
      const std::uint32_t wa = (a == 0) ? 1u : 2u;
      const std::int64_t bmax = static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n - a2)));
      for (std::int64_t b = 0; b <= bmax; ++b) {
        std::int64_t n = a2 + b * b;
        if (n > max_n) break;
        r2[static_cast<std::size_t>(n)] += wa * ((b == 0) ? 1u : 2u);
      }
    }
  }

  ShellIndex idx;
  idx.max_n = max_n;
  idx.counts.assign(size, 0u);

  // Threads own disjoint output ranges; the integer adds commute exactly.
  const unsigned workers = std::max(1u, std::min(thread_cap(), 16u));
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::int64_t j = 0;; ++j) {
      const std::int64_t j2 = j * j;
      if (j2 > static_cast<std::int64_t>(hi - 1)) break;
      const std::uint32_t w = (j == 0) ? 1u : 2u;
      const std::size_t start = std::max<std::int64_t>(static_cast<std::int64_t>(lo) - j2, 0);
      const std::size_t stop = hi - static_cast<std::size_t>(j2);
      const std::uint32_t* src = r2.data() + start;
      std::uint32_t* dst = idx.counts.data() + start + static_cast<std::size_t>(j2);
      if (w == 1u) {
        for (std::size_t i = 0; i < stop - start; ++i) dst[i] += src[i];
      } else {
        for (std::size_t i = 0; i < stop - start; ++i) dst[i] += 2u * src[i];
      }
    }
  };
  if (workers <= 1 || size < (1u << 16)) {
    work(0, size);
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (size + workers - 1) / workers;
    for (unsigned t = 0; t < workers; ++t) {
      std::size_t lo = t * block, hi = std::min(size, lo + block);
      if (lo >= hi) break;
      pool.emplace_back(work, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return idx;
}

// Binary cache: amortizes shell enumeration across runs.
inline bool save_shell_cache(const ShellIndex& idx, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) return false;
  const char magic[8] = {'L', 'H', 'Y', 'S', 'H', 'L', '0', '1'};
  bool ok = std::fwrite(magic, 1, 8, f) == 8 &&
            std::fwrite(&idx.max_n, sizeof(idx.max_n), 1, f) == 1 &&
            std::fwrite(idx.counts.data(), sizeof(std::uint32_t), idx.counts.size(), f) ==
                idx.counts.size();
  std::fclose(f);
  return ok;
}

inline std::optional<ShellIndex> load_shell_cache(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return std::nullopt;
  char magic[8];
  ShellIndex idx;
  if (std::fread(magic, 1, 8, f) != 8 || std::string(magic, 8) != "LHYSHL01" ||
      std::fread(&idx.max_n, sizeof(idx.max_n), 1, f) != 1 || idx.max_n < 0) {
    std::fclose(f);
    return std::nullopt;
  }
  idx.counts.resize(static_cast<std::size_t>(idx.max_n + 1));
  bool ok = std::fread(idx.counts.data(), sizeof(std::uint32_t), idx.counts.size(), f) ==
            idx.counts.size();
  std::fclose(f);
  if (!ok) return std::nullopt;
  return idx;
}

// Shell sum result carrying per-class compensated partials. Sums over disjoint
// filters merge slot-wise, so additivity over a class split is exact by
// construction: value() folds the slots in one fixed order.
struct RadialSum {
  std::array<Kahan, 4> slot{};

  double value() const {
    Kahan acc;
    for (const auto& s : slot) acc.merge(s);
    return acc.value();
  }

  friend RadialSum operator+(const RadialSum& a, const RadialSum& b) {
    RadialSum r;
    for (int c = 0; c < 4; ++c) {
      r.slot[c] = a.slot[c];
      r.slot[c].merge(b.slot[c]);
    }
    return r;
  }
};

// Sum over occupied shells of r3(n) * g((2*pi)^2 n) for shells passing the
// filter. Accumulation is chunked in ascending n with fixed chunk boundaries;
// the reduction is an ordered fold, so the result does not depend on the
// worker count. NaN from g aborts naming the shell.
inline RadialSum sum_radial(const ShellIndex& idx, const std::function<double(double)>& g,
                            const MomentumPartition* partition = nullptr,
                            ClassFilter filter = ClassFilter::all(), std::int64_t n_lo = 1,
                            std::int64_t n_hi = -1) {
  if (n_hi < 0) n_hi = idx.max_n;
  require(n_hi <= idx.max_n, "sum_radial: range beyond shell table");
  n_lo = std::max<std::int64_t>(n_lo, 1);

  const std::int64_t chunk = 1 << 15;
  const std::int64_t n_chunks = (n_hi - n_lo) / chunk + 1;
  std::vector<std::array<Kahan, 4>> partial(static_cast<std::size_t>(n_chunks));
  std::vector<std::int64_t> bad_shell(static_cast<std::size_t>(n_chunks), -1);

  auto run_chunk = [&](std::int64_t c) {
    auto& acc = partial[static_cast<std::size_t>(c)];
    const std::int64_t lo = n_lo + c * chunk;
    const std::int64_t hi = std::min(n_hi, lo + chunk - 1);
    for (std::int64_t n = lo; n <= hi; ++n) {
      const std::uint32_t r3 = idx.counts[static_cast<std::size_t>(n)];
      if (!r3) continue;
      const double p_sq = kTwoPiSq * static_cast<double>(n);
      MClass cls = partition ? partition->classify(p_sq) : MClass::Other;
      if (!filter.passes(cls)) continue;
      const double val = g(p_sq);
      if (std::isnan(val)) {
        bad_shell[static_cast<std::size_t>(c)] = n;
        return;
      }
      acc[static_cast<int>(cls)].add(static_cast<double>(r3) * val);
    }
  };

  const unsigned workers =
      std::min<unsigned>(thread_cap(), static_cast<unsigned>(std::max<std::int64_t>(1, n_chunks)));
  if (workers <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w]() {
        for (std::int64_t c = w; c < n_chunks; c += workers) run_chunk(c);
      });
    for (auto& t : pool) t.join();
  }

  for (std::int64_t c = 0; c < n_chunks; ++c)
    if (bad_shell[static_cast<std::size_t>(c)] >= 0)
      throw diagnostic_error("sum_radial: NaN from integrand at shell n = " +
                             std::to_string(bad_shell[static_cast<std::size_t>(c)]));

  RadialSum out;
  for (const auto& p : partial)
    for (int c = 0; c < 4; ++c) out.slot[c].merge(p[c]);
  return out;
}

// Visits every z in Z^3 with 0 < |z|^2 <= max_n.
template <typename Fn>
inline void for_each_ball_point(std::int64_t max_n, Fn&& fn) {
  const std::int64_t zmax = static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n)));
  for (std::int64_t z1 = -zmax; z1 <= zmax; ++z1) {
    const std::int64_t n1 = z1 * z1;
    if (n1 > max_n) continue;
    const std::int64_t z2max = static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n - n1)));
    for (std::int64_t z2 = -z2max; z2 <= z2max; ++z2) {
      const std::int64_t n12 = n1 + z2 * z2;
      const std::int64_t z3max =
          static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n - n12)));
      for (std::int64_t z3 = -z3max; z3 <= z3max; ++z3) {
        const std::int64_t n = n12 + z3 * z3;
        if (n == 0 || n > max_n) continue;
        fn(z1, z2, z3, n);
      }
    }
  }
}

// Representative point of the octahedral orbit plus its multiplicity
// (#signed permutations). Enumerating a >= b >= c >= 0 covers Z^3 once.
struct WedgePoint {
  std::int64_t z[3];       // sorted descending, nonnegative
  std::int64_t n;          // |z|^2
  std::uint32_t mult;      // orbit size
};

inline std::uint32_t wedge_multiplicity(std::int64_t a, std::int64_t b, std::int64_t c) {
  std::uint32_t perms;
  if (a == b && b == c)
    perms = 1;
  else if (a == b || b == c || a == c)
    perms = 3;
  else
    perms = 6;
  std::uint32_t signs = 1;
  if (a != 0) signs *= 2;
  if (b != 0) signs *= 2;
  if (c != 0) signs *= 2;
  return perms * signs;
}

template <typename Fn>
inline void for_each_wedge_point(std::int64_t max_n, Fn&& fn) {
  const std::int64_t amax = static_cast<std::int64_t>(std::sqrt(static_cast<double>(max_n)));
  for (std::int64_t a = 0; a <= amax; ++a) {
    const std::int64_t na = a * a;
    if (na > max_n) break;
    for (std::int64_t b = 0; b <= a; ++b) {
      const std::int64_t nab = na + b * b;
      if (nab > max_n) break;
      for (std::int64_t c = 0; c <= b; ++c) {
        const std::int64_t n = nab + c * c;
        if (n > max_n) break;
        if (n == 0) continue;
        fn(a, b, c, n, wedge_multiplicity(a, b, c));
      }
    }
  }
}

// Windowed lattice convolution sum_{s, |s| <= 2*pi*window} F(|r-s|^2) G(|s|^2)
// with both factors radial. F is cached per integer squared distance. The
// certificate bounds the discarded |s| > window part through monotone
// envelopes of |F| and |G| (arguments are actual momnorms, not z-units):
//   tail <= (2*pi)^-3 * int_{|q| >= 2*pi*(window - sqrt(3))} envF(max(0,|q|-|r|)) envG(|q|) d^3q.
struct ConvolveResult {
  double value = 0.0;
  double tail_bound = 0.0;
  std::int64_t window = 0;
};

inline ConvolveResult convolve_sum(const std::function<double(double)>& F,
                                   const std::function<double(std::int64_t)>& G_by_shell,
                                   const std::array<std::int64_t, 3>& r_z, std::int64_t window,
                                   const std::function<double(double)>& envF,
                                   const std::function<double(double)>& envG,
                                   double tolerance = -1.0) {
  const std::int64_t W2 = window * window;
  std::vector<double> f_cache;
  std::vector<char> f_have;
  {
    const double rz = std::sqrt(static_cast<double>(r_z[0] * r_z[0] + r_z[1] * r_z[1] +
                                                    r_z[2] * r_z[2]));
    const std::int64_t dmax =
        static_cast<std::int64_t>((rz + static_cast<double>(window) + 2.0) *
                                  (rz + static_cast<double>(window) + 2.0) * 3.0) + 8;
    f_cache.assign(static_cast<std::size_t>(dmax), 0.0);
    f_have.assign(static_cast<std::size_t>(dmax), 0);
  }

  Kahan acc;
  for_each_ball_point(W2, [&](std::int64_t s1, std::int64_t s2, std::int64_t s3, std::int64_t ns) {
    const double g = G_by_shell(ns);
    if (g == 0.0) return;
    const std::int64_t d1 = r_z[0] - s1, d2 = r_z[1] - s2, d3 = r_z[2] - s3;
    const std::int64_t m = d1 * d1 + d2 * d2 + d3 * d3;
    double fv;
    if (m < static_cast<std::int64_t>(f_cache.size())) {
      if (!f_have[static_cast<std::size_t>(m)]) {
        f_cache[static_cast<std::size_t>(m)] = F(kTwoPiSq * static_cast<double>(m));
        f_have[static_cast<std::size_t>(m)] = 1;
      }
      fv = f_cache[static_cast<std::size_t>(m)];
    } else {
      fv = F(kTwoPiSq * static_cast<double>(m));
    }
    acc.add(fv * g);
  });

  // Envelope tail: radial integral of the product, density (2*pi)^-3.
  const double r_norm = kTwoPi * std::sqrt(static_cast<double>(r_z[0] * r_z[0] +
                                                               r_z[1] * r_z[1] + r_z[2] * r_z[2]));
  const double q0 = kTwoPi * std::max(0.5, static_cast<double>(window) - std::sqrt(3.0));
  auto integrand = [&](double q) {
    return envF(std::max(0.0, q - r_norm - kTwoPi * std::sqrt(3.0))) * envG(q) * q * q;
  };
  // integrate to a far horizon; envelopes decay at least like q^-4 in use
  double horizon = std::max(64.0 * q0, 16.0 * (r_norm + q0));
  double tail = adaptive_simpson(integrand, q0, horizon, 1e-10 * std::max(1.0, std::abs(acc.value())));
  // crude geometric continuation beyond the horizon assuming >= q^-2 decay of the product
  tail += integrand(horizon) * horizon / 1.0;
  tail *= 4.0 * M_PI / std::pow(kTwoPi, 3);

  ConvolveResult res{acc.value(), tail, window};
  if (tolerance >= 0.0 && tail > tolerance) {
    double needed = static_cast<double>(window) * std::sqrt(std::max(2.0, tail / tolerance));
    throw certificate_error("convolve_sum window", tail, tolerance, needed);
  }
  return res;
}

}  // namespace lhylab
