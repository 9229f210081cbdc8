#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lhylab/errors.hpp"
#include "lhylab/ksum.hpp"
#include "lhylab/lattice.hpp"
#include "lhylab/partition.hpp"
#include "lhylab/quadrature.hpp"
#include "lhylab/scattering.hpp"

namespace lhylab {

// Pair-diagonalization coefficients at squared momentum p_sq, for scattering
// length a and scale N^kappa. With x = 8 pi a N^kappa,
//   tanh(2 tau) = -x / (p^2 + x),
//   sigma^2     = x^2 / (2 D (p^2 + x + D)),   D = p sqrt(p^2 + 2x),
//   gamma sigma = -x / (2 D).
// sigma is taken negative (repulsive interaction). The tanh route and the
// closed forms are evaluated independently and must agree to 1e-10.
struct BogoliubovRow {
  double tau = 0.0;
  double sigma = 0.0;        // sinh(tau) <= 0
  double gamma = 1.0;        // cosh(tau)
  double sigma_sq = 0.0;     // closed form
  double gamma_sigma = 0.0;  // closed form
};

inline BogoliubovRow bogoliubov_row(double p_sq, double a, double N, double kappa) {
  require(p_sq > 0.0, "bogoliubov_row: p^2 must be positive");
  require(a >= 0.0, "bogoliubov_row: negative scattering length");
  BogoliubovRow row;
  if (a == 0.0) return row;

  const double x = 8.0 * M_PI * a * std::pow(N, kappa);
  const double D = std::sqrt(p_sq) * std::sqrt(p_sq + 2.0 * x);
  row.sigma_sq = x * x / (2.0 * D * (p_sq + x + D));
  row.gamma_sigma = -x / (2.0 * D);
  // tanh(2 tau) = -x/(p^2+x) solved in closed form; log1p keeps it stable
  // arbitrarily deep into the strong-coupling region p^2 << x
  row.tau = -0.25 * std::log1p(2.0 * x / p_sq);
  row.sigma = std::sinh(row.tau);
  row.gamma = std::cosh(row.tau);

  const double s2_tau = row.sigma * row.sigma;
  if (std::abs(s2_tau - row.sigma_sq) > 1e-10 * std::max(row.sigma_sq, 1e-300))
    throw diagnostic_error("bogoliubov_row: tanh route and closed form disagree at p^2 = " +
                           std::to_string(p_sq));
  return row;
}

// One table row per occupied shell n = |z|^2, squared momentum (2 pi)^2 n.
// sigma/gamma are built from nu (tau on the low set, eta above it), so
// gamma^2 - sigma^2 = 1 holds row-wise by construction up to rounding.
struct CoeffRow {
  std::int64_t n = 0;
  std::uint32_t r3 = 0;
  MClass cls = MClass::Other;
  double eta = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  double sigma = 0.0;
  double gamma = 1.0;
  double sigma_sq = 0.0;
  double gamma_sigma = 0.0;
};

struct CoefficientTable {
  MomentumPartition partition;
  double a_scat = 0.0;
  double N = 0.0, kappa = 0.0;
  double eta0 = 0.0;
  std::int64_t max_n = 0;
  std::vector<CoeffRow> rows;
  std::vector<std::int32_t> row_of_n;  // -1 for empty shells

  const CoeffRow* find(std::int64_t n) const {
    if (n < 1 || n > max_n) return nullptr;
    std::int32_t i = row_of_n[static_cast<std::size_t>(n)];
    return (i >= 0) ? &rows[static_cast<std::size_t>(i)] : nullptr;
  }
  double eta(std::int64_t n) const {
    auto* r = find(n);
    return r ? r->eta : 0.0;
  }
};

inline CoefficientTable build_table(const ScatteringSolution& sol,
                                    const MomentumPartition& partition, const ShellIndex& index,
                                    std::int64_t max_shell,
                                    std::size_t memory_budget_bytes = (std::size_t{1} << 31)) {
  require(max_shell >= 1, "build_table: empty shell range");
  require(max_shell <= index.max_n, "build_table: shell table too small");
  require(kTwoPiSq * static_cast<double>(max_shell) >= partition.l_hi_sq,
          "build_table: max_shell must cover the low momentum set");
  const std::size_t need =
      sizeof(CoeffRow) * static_cast<std::size_t>(max_shell) + 4u * static_cast<std::size_t>(max_shell);
  if (need > memory_budget_bytes)
    throw certificate_error("build_table memory budget (bytes)", static_cast<double>(need),
                            static_cast<double>(memory_budget_bytes));

  CoefficientTable t;
  t.partition = partition;
  t.a_scat = sol.a_scat;
  t.N = partition.N;
  t.kappa = partition.kappa;
  t.eta0 = sol.eta0();
  t.max_n = max_shell;
  t.row_of_n.assign(static_cast<std::size_t>(max_shell + 1), -1);

  for (std::int64_t n = 1; n <= max_shell; ++n) {
    std::uint32_t r3 = index.r3(n);
    if (!r3) continue;
    CoeffRow row;
    row.n = n;
    row.r3 = r3;
    const double p_sq = kTwoPiSq * static_cast<double>(n);
    row.cls = partition.classify(p_sq);
    row.eta = sol.zero_potential() ? 0.0 : sol.eta_at_psq(p_sq);
    if (sol.a_scat > 0.0) {
      auto b = bogoliubov_row(p_sq, sol.a_scat, t.N, t.kappa);
      row.tau = b.tau;
    }
    row.nu = (row.cls == MClass::LminusS || row.cls == MClass::S) ? row.tau : row.eta;
    row.sigma = std::sinh(row.nu);
    row.gamma = std::cosh(row.nu);
    row.sigma_sq = row.sigma * row.sigma;
    row.gamma_sigma = row.gamma * row.sigma;
    t.row_of_n[static_cast<std::size_t>(n)] = static_cast<std::int32_t>(t.rows.size());
    t.rows.push_back(row);
  }
  return t;
}

// Norms of Lemma-type coefficient restrictions. The eta norms run over an
// infinite set and carry envelope tail certificates; each must stay below
// tail_rel_tol of its partial sum or the computation refuses, naming the norm.
struct NormTable {
  double eta_Lc_sq = 0.0, eta_H_sq = 0.0;
  double eta_Lc_inf = 0.0, eta_H_inf = 0.0;
  double eta_Lc_H1_sq = 0.0;
  double sigma_L_sq = 0.0, sigma_S_sq = 0.0, gamma_L_sq = 0.0;
  double sigma_L_H1_sq = 0.0, sigma_S_H1_sq = 0.0;
  double gamma_sigma_L_1 = 0.0;
  double sigma_L_inf_sq = 0.0, gamma_S_inf_sq = 0.0;
  // certificates for the truncated sums
  double tail_eta_Lc_sq = 0.0, tail_eta_H_sq = 0.0, tail_eta_Lc_H1_sq = 0.0;
};

namespace detail {

// int_{q0}^inf env(q)^2 q^pow dq / (2 pi^2), with a q^-4 power-law
// continuation beyond the numeric horizon.
inline double envelope_tail_integral(const ScatteringSolution& sol, double q0, int pow) {
  auto f = [&](double q) {
    double e = sol.eta_envelope(q);
    return e * e * std::pow(q, pow);
  };
  double horizon = 64.0 * q0;
  double val = adaptive_simpson(f, q0, horizon, 1e-12 * std::max(1.0, f(q0) * q0));
  double eh = sol.eta_envelope(horizon);
  if (pow == 2)
    val += eh * eh * horizon * horizon * horizon / 5.0;
  else
    val += eh * eh * std::pow(horizon, 5) / 3.0;
  return val / (2.0 * M_PI * M_PI);
}

}  // namespace detail

inline NormTable norm_table(const CoefficientTable& t, const ScatteringSolution& sol,
                            double tail_rel_tol = 0.01) {
  NormTable nt;
  Kahan eta_lc_sq, eta_h_sq, eta_lc_h1, s_l_sq, s_s_sq, g_l_sq, s_l_h1, s_s_h1, gs_l_1;
  for (const auto& r : t.rows) {
    const double p_sq = kTwoPiSq * static_cast<double>(r.n);
    const double w = static_cast<double>(r.r3);
    const bool in_L = (r.cls == MClass::LminusS || r.cls == MClass::S);
    if (!in_L) {
      eta_lc_sq.add(w * r.eta * r.eta);
      eta_lc_h1.add(w * p_sq * r.eta * r.eta);
      nt.eta_Lc_inf = std::max(nt.eta_Lc_inf, std::abs(r.eta));
      if (r.cls == MClass::H) {
        eta_h_sq.add(w * r.eta * r.eta);
        nt.eta_H_inf = std::max(nt.eta_H_inf, std::abs(r.eta));
      }
    } else {
      s_l_sq.add(w * r.sigma_sq);
      g_l_sq.add(w * r.gamma * r.gamma);
      s_l_h1.add(w * p_sq * r.sigma_sq);
      gs_l_1.add(w * std::abs(r.gamma_sigma));
      nt.sigma_L_inf_sq = std::max(nt.sigma_L_inf_sq, r.sigma_sq);
      if (r.cls == MClass::S) {
        s_s_sq.add(w * r.sigma_sq);
        s_s_h1.add(w * p_sq * r.sigma_sq);
        nt.gamma_S_inf_sq = std::max(nt.gamma_S_inf_sq, r.gamma * r.gamma);
      }
    }
  }
  nt.eta_Lc_sq = eta_lc_sq.value();
  nt.eta_H_sq = eta_h_sq.value();
  nt.eta_Lc_H1_sq = eta_lc_h1.value();
  nt.sigma_L_sq = s_l_sq.value();
  nt.sigma_S_sq = s_s_sq.value();
  nt.gamma_L_sq = g_l_sq.value();
  nt.sigma_L_H1_sq = s_l_h1.value();
  nt.sigma_S_H1_sq = s_s_h1.value();
  nt.gamma_sigma_L_1 = gs_l_1.value();

  if (!sol.zero_potential()) {
    const double q0 = kTwoPi * std::sqrt(static_cast<double>(t.max_n));
    nt.tail_eta_Lc_sq = detail::envelope_tail_integral(sol, q0, 2);
    nt.tail_eta_H_sq = nt.tail_eta_Lc_sq;
    nt.tail_eta_Lc_H1_sq = detail::envelope_tail_integral(sol, q0, 4);

    auto check = [&](double tail, double partial, const char* name) {
      if (tail > tail_rel_tol * partial)
        throw certificate_error(std::string("norm_table tail for ") + name, tail,
                                tail_rel_tol * partial);
    };
    check(nt.tail_eta_Lc_sq, nt.eta_Lc_sq, "||eta_Lc||^2");
    check(nt.tail_eta_H_sq, nt.eta_H_sq, "||eta_H||^2");
    check(nt.tail_eta_Lc_H1_sq, nt.eta_Lc_H1_sq, "||eta_Lc||_H1^2");
    // sup norms: certified once the envelope at the cutoff is dominated
    if (sol.eta_envelope(q0) > nt.eta_Lc_inf)
      throw certificate_error("norm_table tail for ||eta_Lc||_inf", sol.eta_envelope(q0),
                              nt.eta_Lc_inf);
  }
  return nt;
}

// Doubles the shell cutoff until every eta tail certificate passes.
struct TableWithNorms {
  CoefficientTable table;
  NormTable norms;
  ShellIndex index;
};

inline TableWithNorms table_with_certified_norms(const ScatteringSolution& sol,
                                                 const MomentumPartition& partition,
                                                 double tail_rel_tol = 0.01,
                                                 std::int64_t initial_n = 0) {
  std::int64_t n = initial_n;
  if (n <= 0) {
    double base = std::max(partition.l_hi_sq, partition.h_lo_sq) / kTwoPiSq;
    n = std::max<std::int64_t>(64, static_cast<std::int64_t>(4.0 * base));
  }
  for (int attempt = 0; attempt < 12; ++attempt) {
    TableWithNorms out;
    out.index = shell_counts(n);
    out.table = build_table(sol, partition, out.index, n);
    try {
      out.norms = norm_table(out.table, sol, tail_rel_tol);
      return out;
    } catch (const certificate_error&) {
      n *= 2;
    }
  }
  throw diagnostic_error("table_with_certified_norms: cutoff search did not converge");
}

}  // namespace lhylab
