#pragma once

#include <cmath>
#include <cstdint>

namespace lhylab {

// Neumaier-compensated accumulator. Deterministic for a fixed sequence of adds;
// two accumulators merge by replaying (sum, comp) as ordinary terms.
struct Kahan {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }

  void merge(const Kahan& other) {
    add(other.sum);
    add(other.comp);
  }

  double value() const { return sum + comp; }
};

}  // namespace lhylab
