#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lhylab/energy_breakdown.hpp"

namespace lhylab {

// Leading closed sums of the cubic-phase expectations, all over
// {v in P_S, r in P_H : r + v in P_H}:
//
//   K_sum = (2/N)   sum r^2 eta_r (eta_r + eta_{r+v}) sigma_v^2
//   C_sum = (2/N)   sum N^k V^(r/M) (eta_r + eta_{r+v}) sigma_v^2
//   V_sum = (1/N^2) sum (N^k V^(./M) * eta)_r (eta_r + eta_{r+v}) sigma_v^2
//
// The constrained inner sums are assembled by inclusion-exclusion from
// full-lattice closed forms (Parseval kernels) minus finite-ball corrections:
// with chi_E the complement of P_H,
//   sum_{r in P_H, r+v in P_H} = full - chi_E(r) ball - chi_E(r+v) ball + both.
//
// Full-lattice pieces per kernel:
//   r^2 eta_r:        sum r^2 eta^2 (radial),  sum r^2 eta_r eta_{r+v} = -N^(1+k) (Dw w)^(v/M)
//   N^k V^:           -N^(1+k) int V w,        -N^(1+k) (V w)^(v/M)
//   (N^k V^ * eta)_r = -N^(1+k) (Vw)^(r/M):    +N^(1+k) int V w^2,  +N^(1+k) (V w w)^(v/M)
struct CubicSums {
  double K_sum = 0.0;
  double C_sum = 0.0;
  double V_sum = 0.0;
  double certified_error = 0.0;  // radial tail of the r^2 eta^2 full sum
  int n_v_orbits = 0;
};

namespace detail {

// smallest admissible N whose S band contains a lattice shell
inline double minimal_admissible_N(double kappa, double eps, double from_N) {
  for (std::int64_t n = 1; n < 4096; ++n) {
    // need N^(kappa-2eps) <= (2 pi)^2 n <= N^(kappa+2eps)
    double lo = std::pow(kTwoPiSq * static_cast<double>(n), 1.0 / (kappa + 2.0 * eps));
    double hi = std::pow(kTwoPiSq * static_cast<double>(n), 1.0 / (kappa - 2.0 * eps));
    if (hi >= from_N && lo < hi) return std::max(lo, from_N) == from_N ? lo : lo;
  }
  return from_N;
}

}  // namespace detail

// band selects the outer set of low momenta: the S band proper (the closed
// sums) or all of P_L (the extension used to compare against the gain term).
enum class CubicBand { S, L };

inline CubicSums cubic_closed_sums(const EnergyEvaluator& ev, CubicBand band = CubicBand::S) {
  const auto& table = ev.table();
  const auto& sol = ev.solution();
  const auto& part = table.partition;
  CubicSums out;
  if (sol.zero_potential()) return out;

  const double N = table.N, kappa = table.kappa;
  const double Nk = std::pow(N, kappa), M = std::pow(N, 1.0 - kappa);
  const double N1k = std::pow(N, 1.0 + kappa);

  // outer orbits
  struct Orbit {
    std::array<std::int64_t, 3> v;
    std::int64_t n;
    double mult, sigma_sq;
  };
  std::vector<Orbit> orbits;
  const std::int64_t Ln = static_cast<std::int64_t>(part.l_hi_sq / kTwoPiSq) + 1;
  for_each_wedge_point(Ln, [&](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t nv,
                               std::uint32_t mult) {
    const double v_sq = kTwoPiSq * static_cast<double>(nv);
    const bool take = (band == CubicBand::S) ? part.in_S(v_sq) : part.in_L(v_sq);
    if (!take) return;
    auto* row = table.find(nv);
    if (!row) return;
    orbits.push_back({{a, b, c}, nv, static_cast<double>(mult), row->sigma_sq});
  });
  if (orbits.empty()) {
    double min_n = detail::minimal_admissible_N(part.kappa, part.eps, part.N);
    throw precondition_error(
        "cubic_closed_sums: the S band holds no lattice shell at N = " +
        std::to_string(part.N) + "; smallest admissible N ~ " + std::to_string(min_n));
  }
  out.n_v_orbits = static_cast<int>(orbits.size());

  // dense caches over the complement ball and its shifted reach
  const std::int64_t En = static_cast<std::int64_t>(part.h_lo_sq / kTwoPiSq);
  const std::int64_t zE = static_cast<std::int64_t>(std::sqrt(static_cast<double>(En))) + 1;
  const std::int64_t zV = static_cast<std::int64_t>(std::sqrt(static_cast<double>(Ln))) + 1;
  const std::int64_t reach = (zE + zV + 2) * (zE + zV + 2);
  auto& eta = ev.eta_dense(reach);
  auto& vh = ev.vhat_dense(reach);
  std::vector<double> vwh(static_cast<std::size_t>(reach + 1));
  for (std::int64_t n = 0; n <= reach; ++n) vwh[static_cast<std::size_t>(n)] = ev.vw_hat_shell(n);

  // full radial piece of the K kernel with its envelope tail certificate
  double full_r2ee = 0.0;
  {
    Kahan acc;
    for (const auto& r : table.rows)
      acc.add(static_cast<double>(r.r3) * kTwoPiSq * static_cast<double>(r.n) * r.eta * r.eta);
    full_r2ee = acc.value();
    const double q0 = kTwoPi * std::sqrt(static_cast<double>(table.max_n));
    out.certified_error += detail::envelope_tail_integral(sol, q0, 4);
  }
  const double full_vee = -N * sol.int_Vw();        // sum V^(r/M) eta_r
  const double full_vwee = N * N * sol.int_Vww();   // sum (-N (Vw)^(r/M)) eta_r

  Kahan K_acc, C_acc, V_acc;
  for (const auto& ob : orbits) {
    const double kv = kTwoPi * std::sqrt(static_cast<double>(ob.n)) / M;
    // full-lattice shifted pieces (kernel units: r^2 eta_r | V^ | -N (Vw)^)
    const double full2_K = -N1k * sol.dww_hat(kv);
    const double full2_C = -N * sol.vw_hat(kv);
    const double full2_V = N * N * sol.vww_hat(kv);

    // corrections chi_E(r) + chi_E(r+v) - both, balls including the origins
    Kahan cK, cC, cV;
    auto kernel_term = [&](std::int64_t nr, std::int64_t ns, double weight) {
      const double pr_sq = kTwoPiSq * static_cast<double>(nr);
      const double pair = eta[static_cast<std::size_t>(nr)] + eta[static_cast<std::size_t>(ns)];
      cK.add(weight * pr_sq * eta[static_cast<std::size_t>(nr)] * pair);
      cC.add(weight * vh[static_cast<std::size_t>(nr)] * pair);
      cV.add(weight * -N * vwh[static_cast<std::size_t>(nr)] * pair);
    };
    auto do_r = [&](std::int64_t r1, std::int64_t r2, std::int64_t r3, std::int64_t nr) {
      const std::int64_t s1 = r1 + ob.v[0], s2 = r2 + ob.v[1], s3 = r3 + ob.v[2];
      const std::int64_t ns = s1 * s1 + s2 * s2 + s3 * s3;
      kernel_term(nr, ns, 1.0);
      if (ns <= En) kernel_term(nr, ns, -1.0);  // overlap of the two balls
    };
    auto do_s = [&](std::int64_t s1, std::int64_t s2, std::int64_t s3, std::int64_t ns) {
      const std::int64_t r1 = s1 - ob.v[0], r2 = s2 - ob.v[1], r3 = s3 - ob.v[2];
      const std::int64_t nr = r1 * r1 + r2 * r2 + r3 * r3;
      kernel_term(nr, ns, 1.0);
    };
    do_r(0, 0, 0, 0);
    for_each_ball_point(En, do_r);
    do_s(0, 0, 0, 0);
    for_each_ball_point(En, do_s);

    const double inner_K = full_r2ee + full2_K - cK.value();
    const double inner_C = full_vee + full2_C - cC.value();
    const double inner_V = full_vwee + full2_V - cV.value();

    K_acc.add(ob.mult * ob.sigma_sq * inner_K);
    C_acc.add(ob.mult * ob.sigma_sq * inner_C);
    V_acc.add(ob.mult * ob.sigma_sq * inner_V);
  }

  out.K_sum = 2.0 / N * K_acc.value();
  out.C_sum = 2.0 / N * Nk * C_acc.value();
  // (N^k V^(./M) * eta)_r = N^k * (-N (Vw)^(r/M)); the 1/N^2 of the sum stays
  out.V_sum = Nk / (N * N) * V_acc.value();
  return out;
}

}  // namespace lhylab
