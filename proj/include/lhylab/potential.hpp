#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lhylab/errors.hpp"
#include "lhylab/quadrature.hpp"

namespace lhylab {

// Repulsive, radial, compactly supported two-body interaction. Units carry
// particle mass m = 1/2 and hbar = 1, so the zero-energy radial equation
// reads -u'' + (V/2) u = 0. Fourier convention:
//   V^(k) = int_R3 V(|x|) e^{-ik.x} d3x = (4*pi/k) int_0^R V(r) sin(kr) r dr.
class Potential {
 public:
  enum class Kind { Zero, SquareWell, Tabulated };

  static Potential zero() {
    Potential p;
    p.kind_ = Kind::Zero;
    p.radius_ = 0.0;
    return p;
  }

  static Potential square_well(double v0, double radius) {
    require(v0 >= 0.0, "potential: square well height must be nonnegative");
    require(radius > 0.0, "potential: square well radius must be positive");
    Potential p;
    p.kind_ = (v0 == 0.0) ? Kind::Zero : Kind::SquareWell;
    p.v0_ = v0;
    p.radius_ = (v0 == 0.0) ? 0.0 : radius;
    return p;
  }

  // Samples (r_i, V_i), r ascending, V >= 0, V(last) expected ~ 0. Monotone
  // cubic (Fritsch-Carlson) interpolation keeps V nonnegative between nodes.
  static Potential tabulated(std::vector<double> r, std::vector<double> v) {
    require(r.size() == v.size() && r.size() >= 2, "potential: need matching sample arrays");
    require(r.front() >= 0.0, "potential: radii must be nonnegative");
    for (std::size_t i = 1; i < r.size(); ++i)
      require(r[i] > r[i - 1], "potential: radii must be strictly increasing");
    for (double x : v) require(x >= 0.0, "potential: V must be nonnegative");
    Potential p;
    p.kind_ = Kind::Tabulated;
    p.rs_ = std::move(r);
    p.vs_ = std::move(v);
    p.radius_ = p.rs_.back();
    p.build_pchip();
    bool all_zero = true;
    for (double x : p.vs_)
      if (x != 0.0) all_zero = false;
    if (all_zero) p.kind_ = Kind::Zero;
    return p;
  }

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  double support_radius() const { return radius_; }
  double well_height() const { return v0_; }

  double value(double r) const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::SquareWell:
        return (r <= radius_) ? v0_ : 0.0;
      case Kind::Tabulated:
        return pchip_eval(r);
    }
    return 0.0;
  }

  // V^(0) = 4*pi int V r^2 dr
  double integral() const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::SquareWell:
        return 4.0 * M_PI * v0_ * radius_ * radius_ * radius_ / 3.0;
      case Kind::Tabulated:
        return 4.0 * M_PI * moment(2);
    }
    return 0.0;
  }

  double fourier(double k) const {
    if (is_zero()) return 0.0;
    if (std::abs(k) < 1e-12) return integral();
    if (kind_ == Kind::SquareWell) {
      const double x = k * radius_;
      double s;
      if (std::abs(x) < 1e-3) {
        const double x2 = x * x;
        s = x * x2 * (1.0 / 3.0 + x2 * (-1.0 / 30.0 + x2 / 840.0));
      } else {
        s = std::sin(x) - x * std::cos(x);
      }
      return 4.0 * M_PI * v0_ * s / (k * k * k);
    }
    // tabulated: resampled Simpson/Filon
    ensure_grid();
    std::vector<double> g(grid_v_.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grid_v_[i] * (grid_r0_ + i * grid_h_);
    return 4.0 * M_PI / k * integrate_sin_samples(g, grid_r0_, grid_h_, k);
  }

  // Monotone upper bound for |V^|:
  //   |V^(k)| <= min( V^(0), 4*pi*int(V r)/k, 4*pi*TV(rV)/k^2 )
  // where TV includes the endpoint jumps of the zero extension of r*V(r).
  double fourier_envelope(double k) const {
    if (is_zero()) return 0.0;
    const double b0 = integral();
    if (k <= 0.0) return b0;
    const double b1 = 4.0 * M_PI * int_rV() / k;
    const double b2 = 4.0 * M_PI * tv_rV() / (k * k);
    return std::min(b0, std::min(b1, b2));
  }

  // int_0^R V(r) r dr
  double int_rV() const {
    if (is_zero()) return 0.0;
    if (kind_ == Kind::SquareWell) return 0.5 * v0_ * radius_ * radius_;
    return moment(1);
  }

  // Total variation of r -> r V(r), extended by zero.
  double tv_rV() const {
    if (is_zero()) return 0.0;
    if (kind_ == Kind::SquareWell) return 2.0 * v0_ * radius_;
    ensure_grid();
    double tv = std::abs(grid_v_[0] * grid_r0_);
    for (std::size_t i = 1; i < grid_v_.size(); ++i) {
      double a = grid_v_[i - 1] * (grid_r0_ + (i - 1) * grid_h_);
      double b = grid_v_[i] * (grid_r0_ + i * grid_h_);
      tv += std::abs(b - a);
    }
    tv += std::abs(grid_v_.back() * (grid_r0_ + (grid_v_.size() - 1) * grid_h_));
    return tv;
  }

  // int_0^R V(r) r^m dr by quadrature (closed form for the well).
  double moment(int m) const {
    if (is_zero()) return 0.0;
    if (kind_ == Kind::SquareWell)
      return v0_ * std::pow(radius_, m + 1) / static_cast<double>(m + 1);
    ensure_grid();
    std::vector<double> g(grid_v_.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = grid_v_[i] * std::pow(grid_r0_ + i * grid_h_, m);
    return simpson(g, grid_h_);
  }

 private:
  Kind kind_ = Kind::Zero;
  double v0_ = 0.0;
  double radius_ = 0.0;

  std::vector<double> rs_, vs_, slopes_;
  mutable std::vector<double> grid_v_;
  mutable double grid_r0_ = 0.0, grid_h_ = 0.0;

  void build_pchip() {
    const std::size_t n = rs_.size();
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (vs_[i + 1] - vs_[i]) / (rs_[i + 1] - rs_[i]);
    slopes_.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] * d[i] <= 0.0) {
        slopes_[i] = 0.0;
      } else {
        double w1 = 2.0 * (rs_[i + 1] - rs_[i]) + (rs_[i] - rs_[i - 1]);
        double w2 = (rs_[i + 1] - rs_[i]) + 2.0 * (rs_[i] - rs_[i - 1]);
        slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
    slopes_[0] = pchip_end_slope(d[0], n > 2 ? d[1] : d[0], rs_[1] - rs_[0],
                                 n > 2 ? rs_[2] - rs_[1] : rs_[1] - rs_[0]);
    slopes_[n - 1] = pchip_end_slope(d[n - 2], n > 2 ? d[n - 3] : d[n - 2],
                                     rs_[n - 1] - rs_[n - 2],
                                     n > 2 ? rs_[n - 2] - rs_[n - 3] : rs_[n - 1] - rs_[n - 2]);
  }

  static double pchip_end_slope(double d0, double d1, double h0, double h1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  }

  double pchip_eval(double r) const {
    if (r <= rs_.front()) return vs_.front();
    if (r >= rs_.back()) return 0.0;
    auto it = std::upper_bound(rs_.begin(), rs_.end(), r);
    std::size_t i = static_cast<std::size_t>(it - rs_.begin()) - 1;
    double h = rs_[i + 1] - rs_[i], t = (r - rs_[i]) / h;
    double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    double h10 = t * (1.0 - t) * (1.0 - t);
    double h01 = t * t * (3.0 - 2.0 * t);
    double h11 = t * t * (t - 1.0);
    return h00 * vs_[i] + h * h10 * slopes_[i] + h01 * vs_[i + 1] + h * h11 * slopes_[i + 1];
  }

  void ensure_grid() const {
    if (!grid_v_.empty()) return;
    const std::size_t n = 4097;
    grid_r0_ = 0.0;
    grid_h_ = radius_ / static_cast<double>(n - 1);
    grid_v_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      grid_v_[i] = const_cast<Potential*>(this)->value(grid_r0_ + i * grid_h_);
  }
};

}  // namespace lhylab
