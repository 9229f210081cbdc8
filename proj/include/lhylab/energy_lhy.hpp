#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "lhylab/errors.hpp"
#include "lhylab/ksum.hpp"
#include "lhylab/lattice.hpp"
#include "lhylab/quadrature.hpp"
#include "lhylab/threads.hpp"

namespace lhylab {

// Second-order energy integrand
//   F(v) = sqrt(v^4 + 16 pi a v^2) - v^2 - 8 pi a + (8 pi a)^2 / (2 v^2),
// evaluated through the cancellation-free rearrangement
//   F = b^3 (s + 3 v^2) / (2 v^2 (s + v^2)(s + v^2 + b)),
// with b = 8 pi a and s = sqrt(v^4 + 2 b v^2). Every factor is positive; the
// naive form loses all significant digits beyond |v| ~ 1e3.
inline double lhy_integrand(double v_sq, double a) {
  require(v_sq > 0.0, "lhy_integrand: pole at v = 0");
  require(a >= 0.0, "lhy_integrand: negative scattering length");
  if (a == 0.0) return 0.0;
  const double b = 8.0 * M_PI * a;
  const double s = std::sqrt(v_sq) * std::sqrt(v_sq + 2.0 * b);
  return b * b * b * (s + 3.0 * v_sq) / (2.0 * v_sq * (s + v_sq) * (s + v_sq + b));
}

// Rigorous pointwise bound F(v) <= 3 b^3 / (4 v^4), used in tail certificates.
inline double lhy_integrand_bound(double v_sq, double a) {
  const double b = 8.0 * M_PI * a;
  return 0.75 * b * b * b / (v_sq * v_sq);
}

struct LhyIntegral {
  double closed = 0.0;      // 4 pi a * (128 / 15 sqrt(pi)) * a^(3/2)
  double quadrature = 0.0;  // (1/(2 (2 pi)^3)) int F(v) d^3v by radial quadrature
};

// The closed form and an independent high-resolution quadrature of the same
// integral; they must agree to 1e-5 or the evaluation aborts.
inline LhyIntegral lhy_integral(double a) {
  require(a >= 0.0, "lhy_integral: negative scattering length");
  LhyIntegral out;
  out.closed = 4.0 * M_PI * a * (128.0 / (15.0 * std::sqrt(M_PI))) * std::pow(a, 1.5);
  if (a == 0.0) return out;

  const double b = 8.0 * M_PI * a;
  const double T = 16.0 * std::sqrt(b);
  auto head = [a](double v) { return lhy_integrand(v * v, a) * v * v; };
  double i_head = adaptive_simpson(head, 1e-8, T, 1e-13 * b * b);
  // tail via u = 1/v: int_T^inf F v^2 dv = int_0^(1/T) F(1/u) u^-4 du
  auto tail = [a](double u) {
    if (u <= 0.0) return 0.0;
    double v = 1.0 / u;
    return lhy_integrand(v * v, a) * v * v * v * v;
  };
  double i_tail = adaptive_simpson(tail, 0.0, 1.0 / T, 1e-13 * b * b);
  out.quadrature = (i_head + i_tail) / (4.0 * M_PI * M_PI);

  if (std::abs(out.quadrature - out.closed) > 1e-5 * out.closed)
    throw diagnostic_error("lhy_integral: quadrature and closed form disagree beyond 1e-5");
  return out;
}

struct RiemannSum {
  double value = 0.0;        // (1/2) sum_{v in h Z^3 \ 0, |v| <= cutoff} F(v)
  double tail_bound = 0.0;   // certified bound on the discarded part
  double h = 0.0;
  double cutoff = 0.0;
  // value * h^3 / (2 pi)^3 estimates the integral; deviation from the closed
  // form is dominated by the excluded origin cell (linear in h).
  double normalized() const { return value * h * h * h / std::pow(kTwoPi, 3); }
};

// Riemann sum of F over the scaled lattice h Z^3 with |v| <= cutoff, streamed
// over integer shells with the fixed-chunk deterministic reduction. The tail
// certificate integrates the pointwise bound over the cell-shifted exterior:
//   tail <= (1/2) (1/h^3) * 4 pi * (3 b^3/4) / (cutoff - h sqrt(3)).
inline RiemannSum lhy_riemann_sum_h(double a, double h, double cutoff,
                                    const ShellIndex* shared_index = nullptr,
                                    double tail_rel_tol = -1.0) {
  require(a >= 0.0, "lhy_riemann_sum: negative scattering length");
  require(h > 0.0 && h < 1.0, "lhy_riemann_sum: spacing must lie in (0, 1)");
  require(cutoff > h * 4.0, "lhy_riemann_sum: cutoff below a few lattice spacings");
  RiemannSum out;
  out.h = h;
  out.cutoff = cutoff;
  if (a == 0.0) return out;

  const double zr = cutoff / h;
  const std::int64_t max_n = static_cast<std::int64_t>(zr * zr);
  std::optional<ShellIndex> own;
  const ShellIndex* idx = shared_index;
  if (!idx || idx->max_n < max_n) {
    own.emplace(shell_counts(max_n));
    idx = &*own;
  }

  const double h_sq = h * h;
  Kahan sum = chunked_sum(1, max_n + 1, [&](std::int64_t lo, std::int64_t hi, Kahan& acc) {
    for (std::int64_t n = lo; n < hi; ++n) {
      std::uint32_t r3 = idx->r3(n);
      if (!r3) continue;
      acc.add(static_cast<double>(r3) * lhy_integrand(h_sq * static_cast<double>(n), a));
    }
  });
  out.value = 0.5 * sum.value();

  const double b = 8.0 * M_PI * a;
  const double edge = cutoff - h * std::sqrt(3.0);
  out.tail_bound = 0.5 * (4.0 * M_PI / (h * h * h)) * (0.75 * b * b * b) / edge;
  if (tail_rel_tol > 0.0 && out.tail_bound > tail_rel_tol * std::abs(out.value)) {
    double needed = cutoff * out.tail_bound / (tail_rel_tol * std::abs(out.value));
    throw certificate_error("lhy_riemann_sum cutoff", out.tail_bound,
                            tail_rel_tol * std::abs(out.value), needed);
  }
  return out;
}

// Spacing h = 2 pi N^(-kappa/2); the caller applies the N^kappa prefactor of
// the energy term.
inline RiemannSum lhy_riemann_sum(double a, double N, double kappa, double cutoff,
                                  const ShellIndex* shared_index = nullptr,
                                  double tail_rel_tol = -1.0) {
  const double h = kTwoPi * std::pow(N, -0.5 * kappa);
  return lhy_riemann_sum_h(a, h, cutoff, shared_index, tail_rel_tol);
}

struct UpperBoundPrediction {
  double main_term = 0.0;       // 4 pi rho^2 a (1 + (128/15 sqrt(pi)) sqrt(rho a^3))
  double second_order = 0.0;    // second-order part alone
  double error_exponent = 0.0;  // 5/2 + min(gamma - 1, (4 - 3 gamma)/7)
  double kappa = 0.0;           // (2 gamma - 1) / (3 gamma - 1)
};

inline UpperBoundPrediction predicted_upper_bound(double rho, double a,
                                                  double gamma_exp = 1.1) {
  require(rho >= 0.0 && a >= 0.0, "predicted_upper_bound: negative inputs");
  require(rho * a * a * a < 1.0, "predicted_upper_bound: rho a^3 must be below 1");
  require(gamma_exp > 1.0, "predicted_upper_bound: gamma must exceed 1");
  UpperBoundPrediction out;
  double lead = 4.0 * M_PI * rho * rho * a;
  out.second_order = lead * (128.0 / (15.0 * std::sqrt(M_PI))) * std::sqrt(rho * a * a * a);
  out.main_term = lead + out.second_order;
  out.error_exponent = 2.5 + std::min(gamma_exp - 1.0, (4.0 - 3.0 * gamma_exp) / 7.0);
  out.kappa = (2.0 * gamma_exp - 1.0) / (3.0 * gamma_exp - 1.0);
  return out;
}

}  // namespace lhylab
