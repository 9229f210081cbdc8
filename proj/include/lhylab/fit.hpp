#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lhylab/errors.hpp"

namespace lhylab {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least-squares fit of log(value) against log(N); the slope is the empirical
// scaling exponent.
inline FitResult fit_exponent(const std::vector<std::pair<double, double>>& rows) {
  require(rows.size() >= 3, "fit_exponent: need at least 3 rows");
  const double n = static_cast<double>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].second > 0.0))
      throw precondition_error("fit_exponent: nonpositive value in row " + std::to_string(i));
    if (!(rows[i].first > 0.0))
      throw precondition_error("fit_exponent: nonpositive N in row " + std::to_string(i));
    double x = std::log(rows[i].first), y = std::log(rows[i].second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  FitResult f;
  double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (auto& [N, v] : rows) {
    double e = std::log(v) - (f.intercept + f.slope * std::log(N));
    ss_res += e * e;
  }
  f.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace lhylab
