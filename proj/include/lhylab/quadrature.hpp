#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lhylab/errors.hpp"
#include "lhylab/ksum.hpp"

namespace lhylab {

// Composite Simpson over uniformly spaced samples (spacing h). An even panel
// count is required for the pure rule; a trailing Simpson-3/8 block absorbs
// the remainder otherwise.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  require(n >= 2, "simpson: need at least two samples");
  if (n == 2) return 0.5 * h * (f[0] + f[1]);

  std::size_t panels = n - 1;
  std::size_t simpson_end = n;   // samples [0, simpson_end) by Simpson
  bool tail38 = false;
  if (panels % 2 != 0) {
    if (n >= 4) {
      simpson_end = n - 3;       // leave 3 panels for the 3/8 rule
      tail38 = true;
      if (simpson_end == 1) {    // exactly 3 panels total
        double s38 = 3.0 * h / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]);
        return s38;
      }
    }
  }

  Kahan acc;
  acc.add(f[0]);
  for (std::size_t i = 1; i + 1 < simpson_end; ++i) acc.add((i % 2 == 1 ? 4.0 : 2.0) * f[i]);
  acc.add(f[simpson_end - 1]);
  double s = acc.value() * h / 3.0;
  if (tail38) {
    std::size_t j = simpson_end - 1;
    s += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
  }
  return s;
}

namespace detail {

// Filon weights for integrals against sin(kx) on paired panels, theta = k*h.
struct FilonCoeffs {
  double alpha, beta, gamma;
};

inline FilonCoeffs filon_coeffs(double theta) {
  FilonCoeffs c;
  if (std::abs(theta) < 0.3) {
    const double t2 = theta * theta;
    c.alpha = theta * t2 * (2.0 / 45.0 + t2 * (-2.0 / 315.0 + t2 * (2.0 / 4725.0)));
    c.beta = 2.0 / 3.0 + t2 * (2.0 / 15.0 + t2 * (-4.0 / 105.0 + t2 * (2.0 / 567.0)));
    c.gamma = 4.0 / 3.0 + t2 * (-2.0 / 15.0 + t2 * (1.0 / 210.0 + t2 * (-1.0 / 11340.0)));
  } else {
    const double s = std::sin(theta), co = std::cos(theta), t3 = theta * theta * theta;
    c.alpha = (theta * theta + theta * s * co - 2.0 * s * s) / t3;
    c.beta = 2.0 * (theta * (1.0 + co * co) - 2.0 * s * co) / t3;
    c.gamma = 4.0 * (s - theta * co) / t3;
  }
  return c;
}

}  // namespace detail

// Filon quadrature for I = int g(x) sin(kx) dx over a uniform grid starting at
// x0 with spacing h. Accurate for arbitrarily large k*h (g interpolated by
// parabolas, the oscillation integrated exactly). Needs an even panel count;
// pads by splitting off one trapezoid panel with local Filon-linear treatment.
inline double filon_sin(std::span<const double> g, double x0, double h, double k) {
  const std::size_t n = g.size();
  require(n >= 3, "filon_sin: need at least three samples");
  std::size_t m = n;
  double extra = 0.0;
  if ((m - 1) % 2 != 0) {
    // integrate the last panel with a two-point product rule (exact for linear g)
    double a = x0 + (m - 2) * h, b = x0 + (m - 1) * h;
    double ga = g[m - 2], gb = g[m - 1];
    // int (c0 + c1 x) sin(kx) over [a,b]
    double c1 = (gb - ga) / h, c0 = ga - c1 * a;
    double sa = std::sin(k * a), sb = std::sin(k * b), ca = std::cos(k * a), cb = std::cos(k * b);
    if (std::abs(k) * h < 1e-8) {
      extra = 0.5 * (ga + gb) * h;
    } else {
      extra = c0 * (ca - cb) / k + c1 * ((sb - sa) / (k * k) - (b * cb - a * ca) / k);
    }
    m -= 1;
  }
  const auto c = detail::filon_coeffs(k * h);
  const double xe = x0 + (m - 1) * h;
  Kahan s_even, s_odd;
  for (std::size_t i = 0; i < m; ++i) {
    double x = x0 + i * h;
    double term = g[i] * std::sin(k * x);
    if (i % 2 == 0)
      s_even.add(term);
    else
      s_odd.add(term);
  }
  double even = s_even.value() - 0.5 * (g[0] * std::sin(k * x0) + g[m - 1] * std::sin(k * xe));
  double val = h * (c.alpha * (g[0] * std::cos(k * x0) - g[m - 1] * std::cos(k * xe)) +
                    c.beta * even + c.gamma * s_odd.value());
  return val + extra;
}

// int g(x) sin(kx) dx over uniform samples; plain Simpson while the grid
// resolves the oscillation, Filon beyond (the accuracy cliff sits near kh ~ 1).
inline double integrate_sin_samples(std::span<const double> g, double x0, double h, double k) {
  if (std::abs(k) * h <= 1.0) {
    std::vector<double> prod(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) prod[i] = g[i] * std::sin(k * (x0 + i * h));
    return simpson(prod, h);
  }
  return filon_sin(g, x0, h, k);
}

// Allocation-free variant with the phase advanced by recurrence; the
// accumulated rounding over n steps is ~ n*eps, far below the rule error.
// Used in per-shell Fourier loops.
inline double integrate_sin_samples_fast(const double* g, std::size_t n, double x0, double h,
                                         double k) {
  if (n < 3 || !(std::abs(k) * h <= 1.0))
    return integrate_sin_samples(std::span<const double>(g, n), x0, h, k);
  const double cd = std::cos(k * h), sd = std::sin(k * h);
  double s = std::sin(k * x0), c = std::cos(k * x0);

  // composite Simpson with a trailing 3/8 block when the panel count is odd
  std::size_t simpson_n = n;
  bool tail38 = false;
  if ((n - 1) % 2 != 0) {
    simpson_n = n - 3;
    tail38 = true;
    if (simpson_n < 3) {  // exactly 3 panels
      double acc = g[0] * s;
      double s1 = s * cd + c * sd, c1 = c * cd - s * sd;
      acc += 3.0 * g[1] * s1;
      double s2 = s1 * cd + c1 * sd, c2 = c1 * cd - s1 * sd;
      acc += 3.0 * g[2] * s2;
      double s3 = s2 * cd + c2 * sd;
      acc += g[3] * s3;
      return acc * 3.0 * h / 8.0;
    }
  }

  Kahan acc;
  acc.add(g[0] * s);
  for (std::size_t i = 1; i < simpson_n; ++i) {
    double s_next = s * cd + c * sd;
    c = c * cd - s * sd;
    s = s_next;
    double wgt = (i + 1 == simpson_n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc.add(wgt * g[i] * s);
  }
  double val = acc.value() * h / 3.0;
  if (tail38) {
    // s, c currently at node simpson_n - 1
    double sj = s, cj = c, block = g[simpson_n - 1] * sj;
    for (int j = 1; j <= 3; ++j) {
      double sn = sj * cd + cj * sd;
      cj = cj * cd - sj * sd;
      sj = sn;
      block += ((j == 3) ? 1.0 : 3.0) * g[simpson_n - 1 + j] * sj;
    }
    val += block * 3.0 * h / 8.0;
  }
  return val;
}

// Adaptive Simpson for smooth integrands.
namespace detail {
inline double adsimp(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adsimp(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adsimp(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int max_depth = 40) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adsimp(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
struct GaussRule {
  std::vector<double> x, w;
};

inline GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0, p1, dp;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = t;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    r.x[i] = -t;
    r.x[n - 1 - i] = t;
    double w = 2.0 / ((1.0 - t * t) * dp * dp);
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  return r;
}

// Elementary antiderivative blocks for the closed-form trigonometric tails.
namespace trig {

// int_a^b sin(kr) dr
inline double i_sin(double k, double a, double b) {
  if (std::abs(k) < 1e-300) return 0.0;
  return (std::cos(k * a) - std::cos(k * b)) / k;
}

// int_a^b r sin(kr) dr
inline double i_r_sin(double k, double a, double b) {
  if (std::abs(k) * std::max(std::abs(a), std::abs(b)) < 1e-8) {
    return k * (b * b * b - a * a * a) / 3.0;  // sin(kr) ~ kr
  }
  auto F = [k](double r) { return std::sin(k * r) / (k * k) - r * std::cos(k * r) / k; };
  return F(b) - F(a);
}

// int_a^b r cos(kr) dr
inline double i_r_cos(double k, double a, double b) {
  if (std::abs(k) * std::max(std::abs(a), std::abs(b)) < 1e-8) {
    return 0.5 * (b * b - a * a);
  }
  auto F = [k](double r) { return std::cos(k * r) / (k * k) + r * std::sin(k * r) / k; };
  return F(b) - F(a);
}

// int_a^b r^2 sin(kr) dr
inline double i_r2_sin(double k, double a, double b) {
  if (std::abs(k) * std::max(std::abs(a), std::abs(b)) < 1e-8) {
    return k * (b * b * b * b - a * a * a * a) / 4.0;
  }
  auto F = [k](double r) {
    return 2.0 * r * std::sin(k * r) / (k * k) - (r * r / k - 2.0 / (k * k * k)) * std::cos(k * r);
  };
  return F(b) - F(a);
}

// int_a^b sin(w r) sin(k r) dr, assuming |w| != |k| is well separated or handled
// by the difference-frequency series.
inline double i_sin_sin(double w, double k, double a, double b) {
  double d = w - k, s = w + k;
  auto half = [a, b](double q) {
    if (std::abs(q) * std::max(std::abs(a), std::abs(b)) < 1e-8) return b - a;
    return (std::sin(q * b) - std::sin(q * a)) / q;
  };
  return 0.5 * (half(d) - half(s));
}

// int_a^b cos(w r) sin(k r) dr
inline double i_cos_sin(double w, double k, double a, double b) {
  double s = k + w, d = k - w;
  auto half = [a, b](double q) {
    if (std::abs(q) < 1e-300) return 0.0;
    return (std::cos(q * a) - std::cos(q * b)) / q;
  };
  return 0.5 * (half(s) + half(d));
}

}  // namespace trig

}  // namespace lhylab
