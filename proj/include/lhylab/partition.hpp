#pragma once

#include <cmath>
#include <string>

#include "lhylab/errors.hpp"

namespace lhylab {

// Momentum classes on the lattice 2*pi*Z^3 \ {0}:
//   L  : |p| <= N^{kappa/2+eps}            (S is the sub-band of L)
//   S  : N^{kappa/2-eps} <= |p| <= N^{kappa/2+eps}
//   H  : |p| >  N^{1-kappa-eps}
// Shells between the L and H thresholds fall in neither set.
enum class MClass : int { LminusS = 0, S = 1, H = 2, Other = 3 };

inline const char* to_string(MClass c) {
  switch (c) {
    case MClass::LminusS: return "L\\S";
    case MClass::S: return "S";
    case MClass::H: return "H";
    default: return "other";
  }
}

struct MomentumPartition {
  double N = 0.0;
  double kappa = 0.0;
  double eps = 0.0;
  // squared-norm thresholds (inclusive for L and the S band, strict for H)
  double s_lo_sq = 0.0;   // N^(kappa-2eps)
  double l_hi_sq = 0.0;   // N^(kappa+2eps), also the S upper edge
  double h_lo_sq = 0.0;   // N^(2-2kappa-2eps)

  static MomentumPartition make(double N, double kappa, double eps) {
    require(N > 1.0, "partition: N must exceed 1");
    require(kappa > 0.5 && kappa < 2.0 / 3.0, "partition: kappa outside (1/2, 2/3)");
    require(eps > 0.0, "partition: eps must be positive");
    require(3.0 * kappa - 2.0 + 4.0 * eps < 0.0,
            "partition: standing assumption 3*kappa - 2 + 4*eps < 0 violated");
    MomentumPartition p;
    p.N = N;
    p.kappa = kappa;
    p.eps = eps;
    p.s_lo_sq = std::pow(N, kappa - 2.0 * eps);
    p.l_hi_sq = std::pow(N, kappa + 2.0 * eps);
    p.h_lo_sq = std::pow(N, 2.0 - 2.0 * kappa - 2.0 * eps);
    return p;
  }

  // Test seam: explicit squared thresholds (must satisfy s_lo <= l_hi <= h_lo).
  static MomentumPartition from_thresholds(double s_lo_sq, double l_hi_sq, double h_lo_sq) {
    require(s_lo_sq <= l_hi_sq && l_hi_sq <= h_lo_sq, "partition: thresholds out of order");
    MomentumPartition p;
    p.s_lo_sq = s_lo_sq;
    p.l_hi_sq = l_hi_sq;
    p.h_lo_sq = h_lo_sq;
    return p;
  }

  // Boundary conventions: "<=" for the L and S edges, ">" for H.
  MClass classify(double p_sq) const {
    require(p_sq > 0.0, "classify: zero mode is excluded");
    if (p_sq <= l_hi_sq) return (p_sq >= s_lo_sq) ? MClass::S : MClass::LminusS;
    if (p_sq > h_lo_sq) return MClass::H;
    return MClass::Other;
  }

  bool in_L(double p_sq) const { return p_sq > 0.0 && p_sq <= l_hi_sq; }
  bool in_S(double p_sq) const { return p_sq >= s_lo_sq && p_sq <= l_hi_sq; }
  bool in_H(double p_sq) const { return p_sq > h_lo_sq; }
};

// Class subset selector for shell sums.
struct ClassFilter {
  bool include[4] = {false, false, false, false};

  static ClassFilter all() {
    ClassFilter f;
    f.include[0] = f.include[1] = f.include[2] = f.include[3] = true;
    return f;
  }
  static ClassFilter only(MClass c) {
    ClassFilter f;
    f.include[static_cast<int>(c)] = true;
    return f;
  }
  static ClassFilter low() {  // L = (L\S) + S
    ClassFilter f;
    f.include[static_cast<int>(MClass::LminusS)] = true;
    f.include[static_cast<int>(MClass::S)] = true;
    return f;
  }
  static ClassFilter low_complement() {  // everything above the L edge
    ClassFilter f;
    f.include[static_cast<int>(MClass::H)] = true;
    f.include[static_cast<int>(MClass::Other)] = true;
    return f;
  }
  bool passes(MClass c) const { return include[static_cast<int>(c)]; }
};

}  // namespace lhylab
