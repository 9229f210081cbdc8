#include <catch2/catch_amalgamated.hpp>

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <random>

#include "lhylab/fock.hpp"
#include "lhylab/fock_weyl.hpp"

using namespace lhylab;
using namespace lhylab::fock;
using rational = boost::multiprecision::cpp_rational;

namespace {

// the canonical single orbit: v = (1,0,0), r = (5,0,0), r+v = (6,0,0)
ModeSet single_orbit() {
  std::vector<Mode> modes = {{1, 0, 0}, {-1, 0, 0}, {5, 0, 0}, {-5, 0, 0}, {6, 0, 0}, {-6, 0, 0}};
  std::vector<ModeClass> cls = {ModeClass::S, ModeClass::S, ModeClass::H,
                                ModeClass::H, ModeClass::H, ModeClass::H};
  return ModeSet::with_triples(modes, cls,
                               {{{5, 0, 0}, {1, 0, 0}}, {{-6, 0, 0}, {1, 0, 0}}});
}

std::map<std::int64_t, double> shell_map(std::initializer_list<std::pair<std::int64_t, double>> v) {
  return std::map<std::int64_t, double>(v.begin(), v.end());
}

}  // namespace

TEST_CASE("normalized ladder contracts") {
  NState vac = NState::vacuum(2);

  SECTION("annihilating the vacuum gives the zero state") {
    CHECK(annihilate(0, vac).norm_sq() == 0.0);
  }

  SECTION("commutator on the vacuum: a a* - a* a = 1") {
    auto lhs = annihilate(0, create(0, vac));
    auto rhs = create(0, annihilate(0, vac));
    CHECK(lhs.inner(vac) - rhs.inner(vac) == Catch::Approx(1.0).margin(1e-15));
    // and on an excited state
    auto psi = create(1, create(0, create(0, vac)));
    auto l2 = annihilate(0, create(0, psi));
    auto r2 = create(0, annihilate(0, psi));
    CHECK((l2.inner(psi) - r2.inner(psi)) / psi.norm_sq() == Catch::Approx(1.0).margin(1e-13));
  }

  SECTION("number expectation on (a*)^3 vac is 3") {
    auto psi = create(0, create(0, create(0, vac)));
    auto n_psi = create(0, annihilate(0, psi));
    CHECK(n_psi.inner(psi) / psi.norm_sq() == Catch::Approx(3.0).margin(1e-13));
  }

  SECTION("cap overflow flags truncation") {
    NState small = NState::vacuum(1, 2);
    auto s1 = create(0, create(0, small));
    CHECK_FALSE(s1.truncated);
    auto s2 = create(0, s1);
    CHECK(s2.truncated);
  }
}

TEST_CASE("cubic phase application") {
  auto ms = single_orbit();
  REQUIRE(ms.triples.size() == 2);
  auto eta = shell_map({{25, 0.5}, {36, 0.3}});
  auto sig = shell_map({{1, 0.2}});
  auto eta_of = [&](const Mode& m) { return eta.at(norm_sq(m)); };
  auto sig_of = [&](const Mode& m) { return sig.at(norm_sq(m)); };

  SECTION("single application puts sigma (eta_r + eta_{r+v}) on the triple key") {
    auto vac = MState<double>::vacuum(ms.modes.size());
    auto a1 = apply_A_unscaled<double>(ms, vac, eta_of, sig_of);
    REQUIRE(a1.amp.size() == 1);
    OccKey key(ms.modes.size(), 0);
    key[static_cast<std::size_t>(ms.find({6, 0, 0}))] = 1;
    key[static_cast<std::size_t>(ms.find({-5, 0, 0}))] = 1;
    key[static_cast<std::size_t>(ms.find({-1, 0, 0}))] = 1;
    REQUIRE(a1.amp.count(key) == 1);
    CHECK(a1.amp.at(key) == Catch::Approx(0.2 * (0.5 + 0.3)).margin(1e-15));
  }

  SECTION("the cutoff blocks reuse of the low momentum") {
    auto sectors = cubic_phase_sectors<double>(ms, 4, eta_of, sig_of);
    CHECK(sectors.size() == 2);  // vacuum + one application; A^2 vanishes
  }

  SECTION("linearity") {
    auto vac = MState<double>::vacuum(ms.modes.size());
    auto st = vac;
    for (auto& [k, c] : st.amp) c *= 3.5;
    auto a_scaled = apply_A_unscaled<double>(ms, st, eta_of, sig_of);
    auto a_plain = apply_A_unscaled<double>(ms, vac, eta_of, sig_of);
    for (auto& [k, c] : a_scaled.amp)
      CHECK(c == Catch::Approx(3.5 * a_plain.amp.at(k)).margin(1e-15));
  }

  SECTION("norm matches the closed formula value 1.0256 at N = 1") {
    auto sectors = cubic_phase_sectors<double>(ms, 4, eta_of, sig_of);
    double norm = sectors_norm_sq<double>(sectors, 1.0);
    CHECK(norm == Catch::Approx(1.0256).margin(1e-14));
    double closed = closed_norm_sq<double>(ms, 3, eta_of, sig_of, 1.0);
    CHECK(closed == Catch::Approx(norm).margin(1e-14));
  }
}

TEST_CASE("two disjoint orbits factorize") {
  std::vector<Mode> modes = {{1, 0, 0},  {-1, 0, 0}, {5, 0, 0},  {-5, 0, 0}, {6, 0, 0},
                             {-6, 0, 0}, {0, 1, 0},  {0, -1, 0}, {0, 7, 0},  {0, -7, 0},
                             {0, 8, 0},  {0, -8, 0}};
  std::vector<ModeClass> cls(modes.size(), ModeClass::H);
  cls[0] = cls[1] = cls[6] = cls[7] = ModeClass::S;
  auto both = ModeSet::with_triples(modes, cls,
                                    {{{5, 0, 0}, {1, 0, 0}},
                                     {{-6, 0, 0}, {1, 0, 0}},
                                     {{0, 7, 0}, {0, 1, 0}},
                                     {{0, -8, 0}, {0, 1, 0}}});
  auto eta = shell_map({{25, 0.5}, {36, 0.3}, {49, 0.7}, {64, 0.4}});
  auto sig = shell_map({{1, 0.2}});
  auto eta_of = [&](const Mode& m) { return eta.at(norm_sq(m)); };
  auto sig_of = [&](const Mode& m) { return sig.at(norm_sq(m)); };

  const double N = 2.0;
  auto sectors = cubic_phase_sectors<double>(both, 4, eta_of, sig_of);
  double combined = sectors_norm_sq<double>(sectors, N);
  double n1 = 1.0 + 0.5 / N * std::pow((0.5 + 0.3) * 0.2, 2) * 2.0;  // two triples per orbit
  double n2 = 1.0 + 0.5 / N * std::pow((0.7 + 0.4) * 0.2, 2) * 2.0;
  CHECK(combined == Catch::Approx(n1 * n2).margin(1e-13));
  CHECK(closed_norm_sq<double>(both, 4, eta_of, sig_of, N) ==
        Catch::Approx(combined).margin(1e-13));
}

namespace {

struct RandomConfig {
  ModeSet ms;
  std::map<std::int64_t, rational> eta_q, sig_q;
};

RandomConfig random_config(std::mt19937_64& rng) {
  static const std::vector<std::pair<Mode, Mode>> orbit_catalog = {
      {{5, 0, 0}, {1, 0, 0}},  {{0, 7, 0}, {0, 1, 0}},  {{0, 0, 9}, {0, 0, 1}},
      {{4, 3, 0}, {1, 0, 0}},  {{0, 6, 2}, {0, 1, 0}},  {{7, 0, 1}, {0, 0, 1}},
  };
  std::uniform_int_distribution<int> n_orbits(1, 3), pick(0, static_cast<int>(orbit_catalog.size()) - 1),
      num(0, 8), den(1, 8);
  RandomConfig rc;
  std::vector<Mode> modes;
  std::vector<ModeClass> cls;
  std::vector<std::pair<Mode, Mode>> triples;
  auto add_mode = [&](const Mode& m, ModeClass c) {
    for (auto& e : modes)
      if (e == m) return;
    modes.push_back(m);
    cls.push_back(c);
    modes.push_back(-m);
    cls.push_back(c);
  };
  int k = n_orbits(rng);
  std::vector<int> chosen;
  for (int i = 0; i < k; ++i) {
    int c = pick(rng);
    bool dup = false;
    for (int e : chosen) dup |= (e == c);
    if (dup) continue;
    chosen.push_back(c);
    auto [r, v] = orbit_catalog[static_cast<std::size_t>(c)];
    add_mode(v, ModeClass::S);
    add_mode(r, ModeClass::H);
    add_mode(r + v, ModeClass::H);
    triples.push_back({r, v});
    triples.push_back({-(r + v), v});
  }
  rc.ms = ModeSet::with_triples(modes, cls, triples);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    std::int64_t n = norm_sq(modes[i]);
    if (cls[i] == ModeClass::S)
      rc.sig_q.emplace(n, rational(num(rng), den(rng)));
    else
      rc.eta_q.emplace(n, rational(num(rng), den(rng)));
  }
  return rc;
}

}  // namespace

TEST_CASE("norm formula on randomized configurations") {
  std::mt19937_64 rng(20260810);

  SECTION("floating: residual below 1e-12 over 100 draws") {
    for (int trial = 0; trial < 100; ++trial) {
      auto rc = random_config(rng);
      auto eta_of = [&](const Mode& m) {
        return static_cast<double>(rc.eta_q.at(norm_sq(m)));
      };
      auto sig_of = [&](const Mode& m) {
        return static_cast<double>(rc.sig_q.at(norm_sq(m)));
      };
      const double N = 3.0;
      auto sectors = cubic_phase_sectors<double>(rc.ms, 6, eta_of, sig_of);
      double direct = sectors_norm_sq<double>(sectors, N);
      double closed = closed_norm_sq<double>(rc.ms, static_cast<int>(sectors.size()), eta_of,
                                             sig_of, N);
      INFO("trial " << trial << ": direct " << direct << " closed " << closed);
      REQUIRE(std::abs(direct - closed) < 1e-12 * std::abs(direct));
    }
  }

  SECTION("exact rational arithmetic: identical values over 25 draws") {
    for (int trial = 0; trial < 25; ++trial) {
      auto rc = random_config(rng);
      auto eta_of = [&](const Mode& m) { return rc.eta_q.at(norm_sq(m)); };
      auto sig_of = [&](const Mode& m) { return rc.sig_q.at(norm_sq(m)); };
      const rational N(7, 2);
      auto sectors = cubic_phase_sectors<rational>(rc.ms, 6, eta_of, sig_of);
      rational direct = sectors_norm_sq<rational>(sectors, N);
      rational closed =
          closed_norm_sq<rational>(rc.ms, static_cast<int>(sectors.size()), eta_of, sig_of, N);
      REQUIRE(direct == closed);
    }
  }
}

TEST_CASE("sector structure of the cubic-phase state") {
  std::mt19937_64 rng(42);
  auto rc = random_config(rng);
  auto eta_of = [&](const Mode& m) { return static_cast<double>(rc.eta_q.at(norm_sq(m))); };
  auto sig_of = [&](const Mode& m) { return static_cast<double>(rc.sig_q.at(norm_sq(m))); };
  auto sectors = cubic_phase_sectors<double>(rc.ms, 6, eta_of, sig_of);

  SECTION("3m particles with exactly one third in low modes, on every key") {
    for (std::size_t m = 0; m < sectors.size(); ++m) {
      for (const auto& [k, c] : sectors[m].amp) {
        int total = 0, low = 0;
        for (std::size_t i = 0; i < k.size(); ++i) {
          total += k[i];
          if (rc.ms.cls[i] == ModeClass::S) low += k[i];
        }
        REQUIRE(total == 3 * static_cast<int>(m));
        REQUIRE(low == static_cast<int>(m));
      }
    }
  }

  SECTION("pair annihilation has zero expectation in the cubic-phase state") {
    auto xi = assemble_xi(sectors, 3.0);
    for (std::size_t i = 0; i < rc.ms.modes.size(); ++i) {
      auto lowered = apply_pair_annihilation(rc.ms, xi, static_cast<int>(i));
      CHECK(std::abs(lowered.inner(xi)) < 1e-14);
    }
  }
}

TEST_CASE("number and kinetic expectations against the closed series") {
  auto ms = single_orbit();
  auto eta = shell_map({{25, 0.5}, {36, 0.3}});
  auto sig = shell_map({{1, 0.2}});
  auto eta_of = [&](const Mode& m) { return eta.at(norm_sq(m)); };
  auto sig_of = [&](const Mode& m) { return sig.at(norm_sq(m)); };
  auto sectors = cubic_phase_sectors<double>(ms, 4, eta_of, sig_of);
  const double N = 1.0;
  double norm = sectors_norm_sq<double>(sectors, N);

  SECTION("single orbit: <N> = 3 * 0.0256 / 1.0256") {
    double num = 0.0, mf = 1.0, Np = 1.0;
    for (std::size_t m = 0; m < sectors.size(); ++m) {
      if (m) {
        mf *= static_cast<double>(m);
        Np *= N;
      }
      num += 3.0 * static_cast<double>(m) * sectors[m].norm_sq() / (mf * mf * Np);
    }
    CHECK(num / norm == Catch::Approx(3.0 * 0.0256 / 1.0256).margin(1e-13));
    // direct occupation-weighted route agrees
    double direct = 0.0;
    mf = 1.0;
    Np = 1.0;
    for (std::size_t m = 0; m < sectors.size(); ++m) {
      if (m) {
        mf *= static_cast<double>(m);
        Np *= N;
      }
      direct += sectors[m].weighted([](const OccKey& k) {
        return static_cast<double>(MState<double>::total(k));
      }) / (mf * mf * Np);
    }
    CHECK(direct == Catch::Approx(num).margin(1e-13));
  }

  SECTION("kinetic expectation matches the closed tuple series to 1e-12") {
    double direct = 0.0, mf = 1.0, Np = 1.0;
    for (std::size_t m = 0; m < sectors.size(); ++m) {
      if (m) {
        mf *= static_cast<double>(m);
        Np *= N;
      }
      direct += sectors[m].weighted([&](const OccKey& k) {
        double e = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i)
          e += kTwoPiSq * static_cast<double>(norm_sq(ms.modes[i])) * k[i];
        return e;
      }) / (mf * mf * Np);
    }
    double closed = closed_kinetic(ms, static_cast<int>(sectors.size()), eta_of, sig_of, N);
    INFO("direct " << direct << " closed " << closed);
    CHECK(std::abs(direct - closed) < 1e-12 * std::abs(direct));
  }
}

TEST_CASE("cubic interaction expectation and its head-tail split") {
  // two orbits sharing the same low momentum force nontrivial exclusions
  std::vector<Mode> modes = {{1, 0, 0},  {-1, 0, 0}, {5, 0, 0},  {-5, 0, 0}, {6, 0, 0},
                             {-6, 0, 0}, {4, 3, 0},  {-4, -3, 0}, {5, 3, 0}, {-5, -3, 0}};
  std::vector<ModeClass> cls(modes.size(), ModeClass::H);
  cls[0] = cls[1] = ModeClass::S;
  auto ms = ModeSet::build(modes, cls);
  REQUIRE(ms.triples.size() >= 4);

  OracleCoeffs co;
  co.N = 2.0;
  co.N0 = 3.0;
  co.eta = shell_map({{25, 0.5}, {36, 0.3}, {34, 0.45}});
  co.sigma = shell_map({{1, 0.2}});
  co.gamma = shell_map({{25, 1.1}, {36, 1.2}, {34, 1.15}});
  co.vhat = shell_map({{25, 0.8}, {36, 0.6}, {34, 0.7}, {1, 0.9}});

  auto eta_of = [&](const Mode& m) { return co.eta_of(m); };
  auto sig_of = [&](const Mode& m) { return co.sigma_of(m); };
  auto sectors = cubic_phase_sectors<double>(ms, 4, eta_of, sig_of);
  double norm = sectors_norm_sq<double>(sectors, co.N);

  // sparse route: 2 <xi, B xi> with B the creation part
  double sparse = 0.0;
  {
    double mf = 1.0, Nr = 1.0;
    const double sq = std::sqrt(co.N);
    for (std::size_t m = 0; m + 1 < sectors.size(); ++m) {
      if (m) {
        mf *= static_cast<double>(m);
        Nr *= sq;
      }
      auto b = apply_cubic_creators<double>(ms, sectors[m], co);
      double w_m = 1.0 / (mf * Nr);
      double w_m1 = w_m / (static_cast<double>(m + 1) * sq);
      sparse += 2.0 * sectors[m + 1].inner(b) * w_m * w_m1;
    }
  }
  auto closed = closed_cubic(ms, static_cast<int>(sectors.size()), co);
  INFO("sparse " << sparse << " closed " << closed.total << " head " << closed.head << " tail "
                 << closed.tail);
  CHECK(std::abs(sparse - closed.total) < 1e-12 * std::max(1.0, std::abs(sparse)));

  // the head factorizes into single-triple weight times the norm series
  double single = 0.0;
  for (const auto& t : ms.triples) {
    const Mode r = ms.modes[static_cast<std::size_t>(t.r)];
    const Mode rv = ms.modes[static_cast<std::size_t>(t.rv)];
    const Mode v = ms.modes[static_cast<std::size_t>(t.v)];
    single += co.vhat_of(r) * (co.eta_of(r) + co.eta_of(rv)) * co.gamma_of(r) * co.gamma_of(rv) *
              co.sigma_of(v) * co.sigma_of(v);
  }
  double head_expected = 2.0 * std::sqrt(co.N0 / co.N) / co.N * single * norm;
  CHECK(closed.head == Catch::Approx(head_expected).epsilon(1e-12));
  CHECK(std::abs(closed.tail) > 0.0);  // exclusions genuinely bite here
}

TEST_CASE("capped displacement and pair-mixing conjugations") {
  SECTION("zero mixing leaves the ladder untouched") {
    CHECK(bogoliubov_conjugation_residual(48, 0.0) == Catch::Approx(0.0).margin(1e-14));
  }

  SECTION("displacement: residual < 1e-8 at N0 = 4, cap 64") {
    CHECK(weyl_conjugation_residual(64, 4.0) < 1e-8);
  }

  SECTION("pair mixing: residual < 1e-8 at nu = 0.3, cap 60") {
    CHECK(bogoliubov_conjugation_residual(60, 0.3) < 1e-8);
  }

  SECTION("cap rule is enforced") {
    CHECK_THROWS_AS(weyl_conjugation_residual(16, 10.0), precondition_error);
  }

  SECTION("number of the displaced-and-mixed vacuum: N0 + 2 sinh^2 nu") {
    const double N0 = 4.0, nu = 0.3;
    double n = displaced_pair_number(40, N0, nu);
    double expect = N0 + 2.0 * std::pow(std::sinh(nu), 2);
    CHECK(n == Catch::Approx(expect).margin(1e-6 + std::exp(-10.0)));
  }
}
