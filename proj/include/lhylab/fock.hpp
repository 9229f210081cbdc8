#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lhylab/errors.hpp"
#include "lhylab/lattice.hpp"

namespace lhylab::fock {

// Lattice mode z (momentum 2 pi z), labelled S (low) or H (high).
using Mode = std::array<int, 3>;

inline Mode operator+(const Mode& a, const Mode& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Mode operator-(const Mode& a) { return {-a[0], -a[1], -a[2]}; }
inline Mode operator-(const Mode& a, const Mode& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline std::int64_t norm_sq(const Mode& a) {
  return std::int64_t{a[0]} * a[0] + std::int64_t{a[1]} * a[1] + std::int64_t{a[2]} * a[2];
}

enum class ModeClass : char { S, H };

// Finite mode list with its admissible creation triples (r, v): r and r+v in
// the high class, v in the low class, with all negatives present so that the
// operator a*_{r+v} a*_{-r} a*_{-v} stays inside the list.
struct ModeSet {
  std::vector<Mode> modes;
  std::vector<ModeClass> cls;
  struct Triple {
    int r = -1, v = -1, rv = -1;      // indices of r, v, r+v
    int c_rv = -1, c_mr = -1, c_mv = -1;  // created modes: r+v, -r, -v
  };
  std::vector<Triple> triples;

  int find(const Mode& m) const {
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (modes[i] == m) return static_cast<int>(i);
    return -1;
  }

  // Explicit triple list (momentum pairs), validated against the class
  // constraints; lets scenarios restrict to a sub-orbit of the admissible set.
  static ModeSet with_triples(std::vector<Mode> mode_list, std::vector<ModeClass> classes,
                              const std::vector<std::pair<Mode, Mode>>& rv_pairs) {
    ModeSet ms = build(std::move(mode_list), std::move(classes));
    std::vector<Triple> keep;
    for (const auto& [r, v] : rv_pairs) {
      bool found = false;
      for (const auto& t : ms.triples) {
        if (ms.modes[static_cast<std::size_t>(t.r)] == r &&
            ms.modes[static_cast<std::size_t>(t.v)] == v) {
          keep.push_back(t);
          found = true;
          break;
        }
      }
      require(found, "mode set: requested triple is not admissible");
    }
    ms.triples = std::move(keep);
    return ms;
  }

  // Builds the triple list from the labelled modes; verifies closure.
  static ModeSet build(std::vector<Mode> mode_list, std::vector<ModeClass> classes) {
    require(mode_list.size() == classes.size(), "mode set: size mismatch");
    ModeSet ms;
    ms.modes = std::move(mode_list);
    ms.cls = std::move(classes);
    for (std::size_t i = 0; i < ms.modes.size(); ++i)
      require(ms.find(-ms.modes[i]) >= 0, "mode set: not closed under negation");
    for (int ir = 0; ir < static_cast<int>(ms.modes.size()); ++ir) {
      if (ms.cls[ir] != ModeClass::H) continue;
      for (int iv = 0; iv < static_cast<int>(ms.modes.size()); ++iv) {
        if (ms.cls[iv] != ModeClass::S) continue;
        Mode rv = ms.modes[ir] + ms.modes[iv];
        int irv = ms.find(rv);
        if (irv < 0 || ms.cls[irv] != ModeClass::H) continue;
        Triple t;
        t.r = ir;
        t.v = iv;
        t.rv = irv;
        t.c_rv = irv;
        t.c_mr = ms.find(-ms.modes[ir]);
        t.c_mv = ms.find(-ms.modes[iv]);
        ms.triples.push_back(t);
      }
    }
    return ms;
  }
};

// Per-shell coefficient tables for the oracle (values need not come from a
// real potential).
struct OracleCoeffs {
  std::map<std::int64_t, double> eta;    // keyed by |z|^2, high shells
  std::map<std::int64_t, double> sigma;  // low shells
  std::map<std::int64_t, double> gamma;  // high shells (pair factors)
  std::map<std::int64_t, double> vhat;   // interaction values by shell
  double N = 1.0;
  double N0 = 1.0;

  double eta_of(const Mode& m) const { return eta.at(norm_sq(m)); }
  double sigma_of(const Mode& m) const { return sigma.at(norm_sq(m)); }
  double gamma_of(const Mode& m) const { return gamma.at(norm_sq(m)); }
  double vhat_of(const Mode& m) const { return vhat.at(norm_sq(m)); }
};

// ---- sparse states ----

using OccKey = std::vector<std::uint8_t>;

// Monomial-basis sparse state: |K> = prod (a*_i)^{n_i} |vac> WITHOUT the
// 1/sqrt(n!) normalization, so creation carries coefficient 1, annihilation
// carries n_i, and <K|K> = prod n_i!. Rational scalars stay rational.
template <typename S>
struct MState {
  std::map<OccKey, S> amp;
  int particle_cap = 64;
  bool truncated = false;

  static MState vacuum(std::size_t n_modes, int cap = 64) {
    MState st;
    st.particle_cap = cap;
    st.amp[OccKey(n_modes, 0)] = S(1);
    return st;
  }

  static int total(const OccKey& k) {
    int t = 0;
    for (auto n : k) t += n;
    return t;
  }

  static S key_factorial(const OccKey& k) {
    S f(1);
    for (auto n : k)
      for (int j = 2; j <= n; ++j) f *= S(j);
    return f;
  }

  S norm_sq() const {
    S s(0);
    for (const auto& [k, c] : amp) s += c * c * key_factorial(k);
    return s;
  }

  S inner(const MState& other) const {
    S s(0);
    for (const auto& [k, c] : amp) {
      auto it = other.amp.find(k);
      if (it != other.amp.end()) s += c * it->second * key_factorial(k);
    }
    return s;
  }

  // weighted number expectation sum_K |c|^2 n! * f(K)
  S weighted(const std::function<S(const OccKey&)>& f) const {
    S s(0);
    for (const auto& [k, c] : amp) s += c * c * key_factorial(k) * f(k);
    return s;
  }
};

// Occupation cutoff of the cubic phase, evaluated on the occupation vector
// the operator acts on (it stands to the right of the creators): no high
// pair (s, -s+v) may already coexist, and no low momentum may be reused in a
// way that reconnects to r or r+v.
inline bool theta_gate(const ModeSet& ms, const OccKey& k, int ir, int iv) {
  const Mode r = ms.modes[static_cast<std::size_t>(ir)];
  const Mode v = ms.modes[static_cast<std::size_t>(iv)];
  for (std::size_t is = 0; is < ms.modes.size(); ++is) {
    if (ms.cls[is] != ModeClass::H || k[is] == 0) continue;
    int other = ms.find(v - ms.modes[is]);
    if (other >= 0 && k[static_cast<std::size_t>(other)] > 0) return false;
  }
  for (std::size_t iw = 0; iw < ms.modes.size(); ++iw) {
    if (ms.cls[iw] != ModeClass::S || k[iw] == 0) continue;
    const Mode w = ms.modes[iw];
    int i1 = ms.find(r - w);
    int i2 = ms.find(-r - v - w);
    int occ = 0;
    if (i1 >= 0) occ += k[static_cast<std::size_t>(i1)];
    if (i2 >= 0) occ += k[static_cast<std::size_t>(i2)];
    if (occ > 0) return false;
  }
  return true;
}

// One application of the cubic phase, monomial basis. The 1/sqrt(N) is NOT
// included here: A^m carries N^(-m/2), which callers apply per 3m-particle
// sector (keeps rational scalars exact).
template <typename S>
MState<S> apply_A_unscaled(const ModeSet& ms, const MState<S>& st,
                           const std::function<S(const Mode&)>& eta_of,
                           const std::function<S(const Mode&)>& sigma_of) {
  MState<S> out;
  out.particle_cap = st.particle_cap;
  out.truncated = st.truncated;
  for (const auto& [k, c] : st.amp) {
    if (MState<S>::total(k) + 3 > st.particle_cap) {
      out.truncated = true;
      continue;
    }
    for (const auto& t : ms.triples) {
      if (!theta_gate(ms, k, t.r, t.v)) continue;
      S coeff = eta_of(ms.modes[static_cast<std::size_t>(t.r)]) *
                sigma_of(ms.modes[static_cast<std::size_t>(t.v)]) * c;
      if (coeff == S(0)) continue;
      OccKey nk = k;
      nk[static_cast<std::size_t>(t.c_rv)]++;
      nk[static_cast<std::size_t>(t.c_mr)]++;
      nk[static_cast<std::size_t>(t.c_mv)]++;
      out.amp[nk] += coeff;
    }
  }
  return out;
}

// xi = sum_m A^m vacuum / m!, exact once max_m reaches the number of distinct
// low momenta (the cutoff forbids low-momentum reuse). Sector m carries
// (1/N)^m relative weight in every quadratic form; the per-sector states are
// returned unscaled.
template <typename S>
std::vector<MState<S>> cubic_phase_sectors(const ModeSet& ms, int max_m,
                                           const std::function<S(const Mode&)>& eta_of,
                                           const std::function<S(const Mode&)>& sigma_of,
                                           int cap = 64) {
  std::vector<MState<S>> sectors;
  sectors.push_back(MState<S>::vacuum(ms.modes.size(), cap));
  for (int m = 1; m <= max_m; ++m) {
    auto next = apply_A_unscaled(ms, sectors.back(), eta_of, sigma_of);
    if (next.amp.empty()) break;
    sectors.push_back(std::move(next));
  }
  return sectors;
}

// ||xi||^2 = sum_m ||A^m vac||^2 / (m!)^2 N^m from the sectors.
template <typename S>
S sectors_norm_sq(const std::vector<MState<S>>& sectors, const S& N) {
  S total(0), mfact(1), Npow(1);
  for (std::size_t m = 0; m < sectors.size(); ++m) {
    if (m > 0) {
      mfact *= S(static_cast<int>(m));
      Npow *= N;
    }
    total += sectors[m].norm_sq() / (mfact * mfact * Npow);
  }
  return total;
}

// ---- the multi-tuple cutoff of the closed formulas ----

// theta({r_j, v_j}) = prod over ordered (i, j, k), j != k, and over
// p_i in {-r_i, r_i+v_i}, p_k in {-r_k, r_k+v_k} of [ -p_i + v_j != p_k ].
inline bool theta_tuple(const ModeSet& ms, const std::vector<int>& tuple, int count) {
  for (int i = 0; i < count; ++i) {
    const auto& ti = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])];
    Mode pi_opts[2] = {-ms.modes[static_cast<std::size_t>(ti.r)],
                       ms.modes[static_cast<std::size_t>(ti.rv)]};
    for (int j = 0; j < count; ++j) {
      const auto& tj = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(j)])];
      const Mode vj = ms.modes[static_cast<std::size_t>(tj.v)];
      for (int k = 0; k < count; ++k) {
        if (j == k) continue;
        const auto& tk = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(k)])];
        Mode pk_opts[2] = {-ms.modes[static_cast<std::size_t>(tk.r)],
                           ms.modes[static_cast<std::size_t>(tk.rv)]};
        for (const auto& pi : pi_opts)
          for (const auto& pk : pk_opts)
            if (vj - pi == pk) return false;
      }
    }
  }
  return true;
}

// Enumerates tuples of triples and accumulates fn(tuple, theta-pass) for all
// m-tuples, m <= max_m.
template <typename Fn>
void for_each_tuple(const ModeSet& ms, int m, Fn&& fn) {
  std::vector<int> tuple(static_cast<std::size_t>(m), 0);
  const int T = static_cast<int>(ms.triples.size());
  if (T == 0 || m == 0) return;
  while (true) {
    fn(tuple);
    int pos = m - 1;
    while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] == T - 1) {
      tuple[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    tuple[static_cast<std::size_t>(pos)]++;
  }
}

// Closed norm formula: sum_m 1/(2^m m! N^m) sum_tuples theta *
// prod (eta_{r_i} + eta_{r_i+v_i})^2 sigma_{v_i}^2.
template <typename S>
S closed_norm_sq(const ModeSet& ms, int max_m, const std::function<S(const Mode&)>& eta_of,
                 const std::function<S(const Mode&)>& sigma_of, const S& N) {
  S total(1);
  S mfact(1), Npow(1), two_pow(1);
  for (int m = 1; m <= max_m; ++m) {
    mfact *= S(m);
    Npow *= N;
    two_pow *= S(2);
    S msum(0);
    for_each_tuple(ms, m, [&](const std::vector<int>& tuple) {
      if (!theta_tuple(ms, tuple, m)) return;
      S prod(1);
      for (int i = 0; i < m; ++i) {
        const auto& t = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])];
        S pair = eta_of(ms.modes[static_cast<std::size_t>(t.r)]) +
                 eta_of(ms.modes[static_cast<std::size_t>(t.rv)]);
        S sv = sigma_of(ms.modes[static_cast<std::size_t>(t.v)]);
        prod *= pair * pair * sv * sv;
      }
      msum += prod;
    });
    total += msum / (two_pow * mfact * Npow);
  }
  return total;
}

// Closed kinetic formula: sum_m 1/(2^m (m-1)! N^m) sum_tuples theta *
// [r_m^2 + v_m^2 + (r_m+v_m)^2] prod (eta+eta)^2 sigma^2, momenta in units
// of 2 pi (energies carry (2 pi)^2).
inline double closed_kinetic(const ModeSet& ms, int max_m,
                             const std::function<double(const Mode&)>& eta_of,
                             const std::function<double(const Mode&)>& sigma_of, double N) {
  double total = 0.0;
  double mfact = 1.0, Npow = 1.0, two_pow = 1.0;
  for (int m = 1; m <= max_m; ++m) {
    if (m > 1) mfact *= (m - 1);
    Npow *= N;
    two_pow *= 2.0;
    Kahan msum;
    for_each_tuple(ms, m, [&](const std::vector<int>& tuple) {
      if (!theta_tuple(ms, tuple, m)) return;
      double prod = 1.0;
      for (int i = 0; i < m; ++i) {
        const auto& t = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])];
        double pair = eta_of(ms.modes[static_cast<std::size_t>(t.r)]) +
                      eta_of(ms.modes[static_cast<std::size_t>(t.rv)]);
        double sv = sigma_of(ms.modes[static_cast<std::size_t>(t.v)]);
        prod *= pair * pair * sv * sv;
      }
      const auto& tm = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(m - 1)])];
      double kin = kTwoPiSq * static_cast<double>(
                                  norm_sq(ms.modes[static_cast<std::size_t>(tm.r)]) +
                                  norm_sq(ms.modes[static_cast<std::size_t>(tm.v)]) +
                                  norm_sq(ms.modes[static_cast<std::size_t>(tm.rv)]));
      msum.add(kin * prod);
    });
    total += msum.value() / (two_pow * mfact * Npow);
  }
  return total;
}

// Closed cubic-term expectation and its head/tail split: the tuple sum
//   2 sqrt(N0/N) sum_m 1/(2^(m-1) (m-1)! N^m) sum theta(m-tuple)
//     V^(r_m)(eta_{r_m} + eta_{r_m+v_m}) gamma_{r_m} gamma_{r_m+v_m} sigma_{v_m}^2
//     prod_{i<m} (eta+eta)^2 sigma^2,
// and the same with theta(m-tuple) replaced by theta(m-1) (head I_C) or by
// theta(m-1) [theta_m - 1] (tail J_C).
struct CubicExpectation {
  double total = 0.0;
  double head = 0.0;  // I_C
  double tail = 0.0;  // J_C
};

// Creation part of the cubic interaction operator on the finite mode set:
//   B = (sqrt(N0)/N) sum_{p, r in H : p+r in S} vhat(r) sigma_{p+r}
//       gamma_p gamma_r a*_{p+r} a*_{-p} a*_{-r},
// the full operator being B + B^dagger. vhat carries whatever momentum scale
// the caller baked into the table.
template <typename S>
MState<S> apply_cubic_creators(const ModeSet& ms, const MState<S>& st, const OracleCoeffs& co) {
  MState<S> out;
  out.particle_cap = st.particle_cap;
  const int n = static_cast<int>(ms.modes.size());
  const double pref = std::sqrt(co.N0) / co.N;
  for (const auto& [k, c] : st.amp) {
    if (MState<S>::total(k) + 3 > st.particle_cap) {
      out.truncated = true;
      continue;
    }
    for (int ip = 0; ip < n; ++ip) {
      if (ms.cls[static_cast<std::size_t>(ip)] != ModeClass::H) continue;
      for (int ir = 0; ir < n; ++ir) {
        if (ms.cls[static_cast<std::size_t>(ir)] != ModeClass::H) continue;
        Mode pr = ms.modes[static_cast<std::size_t>(ip)] + ms.modes[static_cast<std::size_t>(ir)];
        int ipr = ms.find(pr);
        if (ipr < 0 || ms.cls[static_cast<std::size_t>(ipr)] != ModeClass::S) continue;
        int imp = ms.find(-ms.modes[static_cast<std::size_t>(ip)]);
        int imr = ms.find(-ms.modes[static_cast<std::size_t>(ir)]);
        double w = pref * co.vhat_of(ms.modes[static_cast<std::size_t>(ir)]) *
                   co.sigma_of(pr) * co.gamma_of(ms.modes[static_cast<std::size_t>(ip)]) *
                   co.gamma_of(ms.modes[static_cast<std::size_t>(ir)]);
        OccKey nk = k;
        nk[static_cast<std::size_t>(ipr)]++;
        nk[static_cast<std::size_t>(imp)]++;
        nk[static_cast<std::size_t>(imr)]++;
        out.amp[nk] += S(w) * c;
      }
    }
  }
  return out;
}

// Assembles xi = sum_m A^m vac / m! as a single weighted sparse state
// (double precision; sectors never mix occupation keys).
inline MState<double> assemble_xi(const std::vector<MState<double>>& sectors, double N) {
  MState<double> xi;
  xi.particle_cap = sectors.empty() ? 64 : sectors[0].particle_cap;
  double mfact = 1.0, Nroot = 1.0;
  const double sqN = std::sqrt(N);
  for (std::size_t m = 0; m < sectors.size(); ++m) {
    if (m > 0) {
      mfact *= static_cast<double>(m);
      Nroot *= sqN;
    }
    for (const auto& [k, c] : sectors[m].amp) xi.amp[k] += c / (mfact * Nroot);
  }
  return xi;
}

// a_p a_{-p} applied in the monomial basis (annihilation carries n).
inline MState<double> apply_pair_annihilation(const ModeSet& ms, const MState<double>& st,
                                              int mode_idx) {
  MState<double> out;
  out.particle_cap = st.particle_cap;
  int neg = ms.find(-ms.modes[static_cast<std::size_t>(mode_idx)]);
  require(neg >= 0, "pair annihilation: missing negated mode");
  for (const auto& [k, c] : st.amp) {
    OccKey nk = k;
    if (nk[static_cast<std::size_t>(mode_idx)] == 0) continue;
    double w = static_cast<double>(nk[static_cast<std::size_t>(mode_idx)]);
    nk[static_cast<std::size_t>(mode_idx)]--;
    if (nk[static_cast<std::size_t>(neg)] == 0) continue;
    w *= static_cast<double>(nk[static_cast<std::size_t>(neg)]);
    nk[static_cast<std::size_t>(neg)]--;
    out.amp[nk] += w * c;
  }
  return out;
}

inline CubicExpectation closed_cubic(const ModeSet& ms, int max_m, const OracleCoeffs& co) {
  CubicExpectation out;
  auto eta_of = [&](const Mode& m) { return co.eta_of(m); };
  double pref = 2.0 * std::sqrt(co.N0 / co.N);
  double mfact = 1.0, Npow = 1.0, two_pow = 1.0;
  for (int m = 1; m <= max_m; ++m) {
    if (m > 1) {
      mfact *= (m - 1);
      two_pow *= 2.0;
    }
    Npow *= co.N;
    Kahan full, head;
    for_each_tuple(ms, m, [&](const std::vector<int>& tuple) {
      bool th_full = theta_tuple(ms, tuple, m);
      bool th_head = (m == 1) ? true : theta_tuple(ms, tuple, m - 1);
      if (!th_full && !th_head) return;
      double prod = 1.0;
      for (int i = 0; i + 1 < m; ++i) {
        const auto& t = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])];
        double pair = eta_of(ms.modes[static_cast<std::size_t>(t.r)]) +
                      eta_of(ms.modes[static_cast<std::size_t>(t.rv)]);
        double sv = co.sigma_of(ms.modes[static_cast<std::size_t>(t.v)]);
        prod *= pair * pair * sv * sv;
      }
      const auto& tm = ms.triples[static_cast<std::size_t>(tuple[static_cast<std::size_t>(m - 1)])];
      const Mode rm = ms.modes[static_cast<std::size_t>(tm.r)];
      const Mode rvm = ms.modes[static_cast<std::size_t>(tm.rv)];
      const Mode vm = ms.modes[static_cast<std::size_t>(tm.v)];
      double w = co.vhat_of(rm) * (eta_of(rm) + eta_of(rvm)) * co.gamma_of(rm) *
                 co.gamma_of(rvm) * co.sigma_of(vm) * co.sigma_of(vm) * prod;
      if (th_full) full.add(w);
      if (th_head) head.add(w);
    });
    out.total += pref * full.value() / (two_pow * mfact * Npow);
    out.head += pref * head.value() / (two_pow * mfact * Npow);
  }
  out.tail = out.total - out.head;
  return out;
}

// ---- normalized-basis ladder view (double precision) ----
//
// Standard bosonic ladder semantics on the orthonormal occupation basis:
// a* carries sqrt(n+1), a carries sqrt(n), <K|K'> = delta. Used for the
// commutation-relation and ladder contracts; the heavy combinatorics above
// run in the monomial basis.
struct NState {
  std::map<OccKey, double> amp;
  int particle_cap = 64;
  bool truncated = false;

  static NState vacuum(std::size_t n_modes, int cap = 64) {
    NState st;
    st.particle_cap = cap;
    st.amp[OccKey(n_modes, 0)] = 1.0;
    return st;
  }
  double norm_sq() const {
    double s = 0.0;
    for (const auto& [k, c] : amp) s += c * c;
    return s;
  }
  double inner(const NState& o) const {
    double s = 0.0;
    for (const auto& [k, c] : amp) {
      auto it = o.amp.find(k);
      if (it != o.amp.end()) s += c * it->second;
    }
    return s;
  }
  NState scaled(double x) const {
    NState st = *this;
    for (auto& [k, c] : st.amp) c *= x;
    return st;
  }
  NState plus(const NState& o, double w = 1.0) const {
    NState st = *this;
    for (const auto& [k, c] : o.amp) st.amp[k] += w * c;
    return st;
  }
};

inline int NStateTotal(const OccKey& k) {
  int t = 0;
  for (auto n : k) t += n;
  return t;
}

inline NState create(int mode, const NState& st) {
  NState out;
  out.particle_cap = st.particle_cap;
  out.truncated = st.truncated;
  for (const auto& [k, c] : st.amp) {
    if (NStateTotal(k) + 1 > st.particle_cap) {
      out.truncated = true;
      continue;
    }
    OccKey nk = k;
    nk[static_cast<std::size_t>(mode)]++;
    out.amp[nk] += std::sqrt(static_cast<double>(nk[static_cast<std::size_t>(mode)])) * c;
  }
  return out;
}

inline NState annihilate(int mode, const NState& st) {
  NState out;
  out.particle_cap = st.particle_cap;
  out.truncated = st.truncated;
  for (const auto& [k, c] : st.amp) {
    if (k[static_cast<std::size_t>(mode)] == 0) continue;  // vacuum annihilates to zero
    OccKey nk = k;
    double w = std::sqrt(static_cast<double>(nk[static_cast<std::size_t>(mode)]));
    nk[static_cast<std::size_t>(mode)]--;
    out.amp[nk] += w * c;
  }
  return out;
}

}  // namespace lhylab::fock
