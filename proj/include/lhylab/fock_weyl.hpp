#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <utility>

#include "lhylab/errors.hpp"

namespace lhylab::fock {

// Capped-space exponentials of the displacement and pair-mixing generators,
// with the conjugation identities
//   W* a0 W = a0 + sqrt(N0),
//   T* a_p T = cosh(nu) a_p + sinh(nu) a*_{-p},
// checked on low-occupancy vectors. The generators are real antisymmetric,
// so the exponentials are orthogonal and the adjoint is the transpose.

namespace detail {

// single-mode a on the orthonormal occupation basis, dimension cap+1
inline Eigen::MatrixXd ladder_a(int cap) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cap + 1, cap + 1);
  for (int n = 1; n <= cap; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// orthogonal exponential of an antisymmetric matrix by scaling and squaring
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& g) {
  double nrm = g.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++s;
  }
  Eigen::MatrixXd x = g / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(g.rows(), g.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

}  // namespace detail

struct WeylBogReport {
  double weyl_residual = 0.0;
  double bog_residual = 0.0;
  int cap = 0;
};

// Weyl displacement on a single capped mode: residual of W^T a W - a -
// sqrt(N0) on occupation states n <= cap/4.
inline double weyl_conjugation_residual(int cap, double N0) {
  require(cap >= 4 * std::max(N0, 10.0), "weyl: cap below 4 max(N0, 10)");
  auto a = detail::ladder_a(cap);
  Eigen::MatrixXd g = std::sqrt(N0) * (a.transpose() - a);
  Eigen::MatrixXd W = detail::expm(g);
  Eigen::MatrixXd lhs = W.transpose() * a * W - a -
                        std::sqrt(N0) * Eigen::MatrixXd::Identity(cap + 1, cap + 1);
  double res = 0.0;
  for (int n = 0; n <= cap / 4; ++n) res = std::max(res, lhs.col(n).norm());
  return res;
}

// Pair mixing on the two-mode space (p, -p). The generator preserves the
// charge c = n_p - n_{-p}; each charge block is exponentiated separately.
class PairMixer {
 public:
  PairMixer(int cap, double nu) : cap_(cap), nu_(nu) {}

  // vector representation: (n_p, n_m) -> coefficient
  using Vec = std::map<std::pair<int, int>, double>;

  Vec apply(const Vec& v, bool transpose = false) const {
    // split by charge, multiply blockwise
    Vec out;
    std::map<int, std::vector<double>> by_charge;
    for (const auto& [nm, c] : v) {
      int charge = nm.first - nm.second;
      auto& blk = by_charge[charge];
      std::size_t idx = static_cast<std::size_t>(nm.second);
      if (blk.size() <= idx) blk.resize(idx + 1, 0.0);
      blk[idx] = c;
    }
    for (auto& [charge, blk] : by_charge) {
      const auto& T = block(charge);
      std::size_t dim = static_cast<std::size_t>(T.rows());
      blk.resize(dim, 0.0);
      Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(blk.data(), static_cast<long>(dim));
      Eigen::VectorXd y = transpose ? Eigen::VectorXd(T.transpose() * x) : Eigen::VectorXd(T * x);
      for (long n = 0; n < y.size(); ++n) {
        if (y(n) == 0.0) continue;
        int nm_ = static_cast<int>(n);
        int np_ = nm_ + charge;
        if (np_ < 0) continue;
        out[{np_, nm_}] += y(n);
      }
    }
    return out;
  }

  static double vec_norm(const Vec& v) {
    double s = 0.0;
    for (auto& [k, c] : v) s += c * c;
    return std::sqrt(s);
  }

  static Vec ap(const Vec& v) {  // annihilate mode p
    Vec out;
    for (auto& [k, c] : v)
      if (k.first > 0) out[{k.first - 1, k.second}] += std::sqrt(double(k.first)) * c;
    return out;
  }
  static Vec adm(const Vec& v) {  // create mode -p
    Vec out;
    for (auto& [k, c] : v) out[{k.first, k.second + 1}] += std::sqrt(double(k.second + 1)) * c;
    return out;
  }

  int cap() const { return cap_; }

 private:
  const Eigen::MatrixXd& block(int charge) const {
    auto it = blocks_.find(charge);
    if (it != blocks_.end()) return it->second;
    // states (n + max(charge,0), n + max(-charge,0)) for n = 0.. indexed by n_m
    int nmin_p = std::max(charge, 0);
    int dim = cap_ + 1 - nmin_p;  // n_m from 0 while n_p <= cap
    dim = std::min(dim, cap_ + 1);
    require(dim >= 1, "pair mixer: empty charge block");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim, dim);
    for (int n = 0; n + 1 < dim; ++n) {
      // a*_p a*_m : (n_p, n_m) -> sqrt((n_p+1)(n_m+1)), with n_p = n + charge
      double w = nu_ * std::sqrt(static_cast<double>((n + 1 + std::max(charge, 0)) *
                                                     (n + 1 + std::max(-charge, 0))));
      g(n + 1, n) += w;
      g(n, n + 1) -= w;
    }
    auto [it2, ok] = blocks_.emplace(charge, detail::expm(g));
    (void)ok;
    return it2->second;
  }

  int cap_;
  double nu_;
  mutable std::map<int, Eigen::MatrixXd> blocks_;
};

// residual of T^T a_p T - cosh(nu) a_p - sinh(nu) a*_{-p} over states with at
// most max_particles in the pair
inline double bogoliubov_conjugation_residual(int cap, double nu, int max_particles = 5) {
  require(cap >= 40, "bogoliubov: cap below 40");
  PairMixer T(cap, nu);
  double res = 0.0;
  for (int np = 0; np <= max_particles; ++np)
    for (int nm = 0; np + nm <= max_particles; ++nm) {
      PairMixer::Vec psi{{{np, nm}, 1.0}};
      auto lhs = T.apply(PairMixer::ap(T.apply(psi)), true);
      PairMixer::Vec rhs;
      for (auto& [k, c] : PairMixer::ap(psi)) rhs[k] += std::cosh(nu) * c;
      for (auto& [k, c] : PairMixer::adm(psi)) rhs[k] += std::sinh(nu) * c;
      PairMixer::Vec diff = lhs;
      for (auto& [k, c] : rhs) diff[k] -= c;
      res = std::max(res, PairMixer::vec_norm(diff));
    }
  return res;
}

inline WeylBogReport weyl_bogoliubov_actions(int cap, double N0, double nu) {
  WeylBogReport rep;
  rep.cap = cap;
  rep.weyl_residual = weyl_conjugation_residual(cap, N0);
  rep.bog_residual = bogoliubov_conjugation_residual(cap, nu);
  return rep;
}

// expected particle number of the displaced-and-mixed vacuum on the capped
// three-mode system (0, p, -p): N0 from the coherent mode, 2 sinh^2(nu) from
// the pair
inline double displaced_pair_number(int cap, double N0, double nu) {
  auto a = detail::ladder_a(cap);
  Eigen::MatrixXd W = detail::expm(std::sqrt(N0) * (a.transpose() - a));
  Eigen::VectorXd vac = Eigen::VectorXd::Zero(cap + 1);
  vac(0) = 1.0;
  Eigen::VectorXd coh = W * vac;
  double n0 = 0.0;
  for (int n = 0; n <= cap; ++n) n0 += n * coh(n) * coh(n);

  PairMixer T(cap, nu);
  PairMixer::Vec pv{{{0, 0}, 1.0}};
  auto tv = T.apply(pv);
  double npair = 0.0;
  for (auto& [k, c] : tv) npair += (k.first + k.second) * c * c;
  return n0 + npair;
}

}  // namespace lhylab::fock
