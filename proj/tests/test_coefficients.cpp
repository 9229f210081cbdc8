#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lhylab/coefficients.hpp"
#include "lhylab/fit.hpp"

using namespace lhylab;

TEST_CASE("partition thresholds and boundary conventions") {
  SECTION("standing assumption is enforced") {
    CHECK_THROWS_AS(MomentumPartition::make(1e4, 0.55, 0.1), precondition_error);
    CHECK_THROWS_AS(MomentumPartition::make(1e4, 0.70, 0.01), precondition_error);
    CHECK_NOTHROW(MomentumPartition::make(1e4, 0.55, 0.01));
  }

  SECTION("low and high sets are disjoint whenever construction succeeds") {
    for (double kappa : {0.51, 0.55, 0.60, 0.65}) {
      double eps = 0.24 * (2.0 - 3.0 * kappa);  // inside the admissible band
      auto p = MomentumPartition::make(1e5, kappa, eps);
      CHECK(p.l_hi_sq <= p.h_lo_sq);
    }
  }

  SECTION("first shell at N = 1e4 sits below the S band") {
    auto p = MomentumPartition::make(1e4, 0.55, 0.01);
    // independent logarithm comparison: |p|^2 = (2 pi)^2 vs N^(kappa - 2 eps)
    REQUIRE(std::log(kTwoPiSq) < (0.55 - 0.02) * std::log(1e4));
    CHECK(p.classify(kTwoPiSq) == MClass::LminusS);
  }

  SECTION("boundaries: inclusive for L and S, strict for H") {
    auto p = MomentumPartition::from_thresholds(4.0, 16.0, 400.0);
    CHECK(p.classify(16.0) == MClass::S);          // |p| = upper edge: still L and S
    CHECK(p.classify(4.0) == MClass::S);           // S lower edge inclusive
    CHECK(p.classify(3.999999) == MClass::LminusS);
    CHECK(p.classify(400.0) == MClass::Other);     // H is strict
    CHECK(p.classify(400.0000001) == MClass::H);
    CHECK_THROWS_AS(p.classify(0.0), precondition_error);
  }
}

TEST_CASE("bogoliubov row closed forms") {
  SECTION("free case") {
    auto r = bogoliubov_row(10.0, 0.0, 1e4, 0.55);
    CHECK(r.tau == 0.0);
    CHECK(r.sigma == 0.0);
    CHECK(r.gamma == 1.0);
    CHECK(r.sigma_sq == 0.0);
  }

  SECTION("negative scattering length is rejected") {
    CHECK_THROWS_AS(bogoliubov_row(10.0, -1.0, 1e4, 0.55), precondition_error);
  }

  SECTION("p^2 = 8 pi a N^kappa gives sigma^2 = (2 - sqrt 3)/(2 sqrt 3)") {
    const double a = 0.2384, N = 1e4, kappa = 0.55;
    const double x = 8.0 * M_PI * a * std::pow(N, kappa);
    auto r = bogoliubov_row(x, a, N, kappa);
    CHECK(r.sigma_sq == Catch::Approx((2.0 - std::sqrt(3.0)) / (2.0 * std::sqrt(3.0))).epsilon(1e-12));
  }

  SECTION("large-momentum asymptote sigma^2 -> x^2 / (4 p^4)") {
    const double a = 0.2384, N = 1e4, kappa = 0.55;
    const double x = 8.0 * M_PI * a * std::pow(N, kappa);
    const double p = 1e3 * std::pow(N, 0.5 * kappa);
    auto r = bogoliubov_row(p * p, a, N, kappa);
    double asym = x * x / (4.0 * p * p * p * p);
    CHECK(r.sigma_sq / asym == Catch::Approx(1.0).epsilon(1e-2));
  }

  SECTION("tanh route and closed form agree over a wide momentum range") {
    const double a = 0.5180, N = 1e6, kappa = 0.6;
    for (double lp = -2.0; lp < 8.0; lp += 0.25) {
      double p_sq = std::pow(10.0, lp);
      auto r = bogoliubov_row(p_sq, a, N, kappa);
      CHECK(std::abs(r.sigma * r.sigma - r.sigma_sq) <= 1e-10 * r.sigma_sq);
      CHECK(std::abs(r.gamma * r.sigma - r.gamma_sigma) <= 1e-9 * std::abs(r.gamma_sigma));
      CHECK(r.sigma <= 0.0);
      CHECK(r.gamma_sigma <= 0.0);
    }
  }
}

namespace {

TableWithNorms make_default(double N, double kappa = 0.55, double eps = 0.01) {
  auto V = Potential::square_well(2.0, 1.0);
  auto sol = solve_neumann(V, 0.4, N, kappa);
  auto part = MomentumPartition::make(N, kappa, eps);
  return table_with_certified_norms(sol, part);
}

}  // namespace

TEST_CASE("table construction") {
  SECTION("zero potential: eta = sigma = 0, gamma = 1") {
    auto sol = solve_neumann(Potential::zero(), 0.4, 1e4, 0.55);
    auto part = MomentumPartition::make(1e4, 0.55, 0.01);
    auto idx = shell_counts(256);
    auto t = build_table(sol, part, idx, 256);
    for (const auto& r : t.rows) {
      REQUIRE(r.eta == 0.0);
      REQUIRE(r.sigma == 0.0);
      REQUIRE(r.gamma == 1.0);
    }
  }

  SECTION("row count equals the number of occupied shells") {
    auto sol = solve_neumann(Potential::square_well(2.0, 1.0), 0.4, 1e4, 0.55);
    auto part = MomentumPartition::make(1e4, 0.55, 0.01);
    auto idx = shell_counts(512);
    auto t = build_table(sol, part, idx, 512);
    std::size_t occupied = 0;
    for (std::int64_t n = 1; n <= 512; ++n)
      if (idx.r3(n)) ++occupied;
    CHECK(t.rows.size() == occupied);
  }

  SECTION("hyperbolic identity on every row, both classes") {
    auto tw = make_default(1e4);
    for (const auto& r : tw.table.rows) {
      REQUIRE(std::abs(r.gamma * r.gamma - r.sigma * r.sigma - 1.0) < 1e-12);
    }
  }

  SECTION("sigma_sq and |gamma sigma| decrease along shells in the tau regime") {
    auto tw = make_default(1e4);
    const CoeffRow* prev = nullptr;
    for (const auto& r : tw.table.rows) {
      if (!(r.cls == MClass::LminusS || r.cls == MClass::S)) break;
      if (prev) {
        CHECK(r.sigma_sq < prev->sigma_sq);
        CHECK(std::abs(r.gamma_sigma) < std::abs(prev->gamma_sigma));
      }
      prev = &r;
    }
  }

  SECTION("memory budget refusal") {
    auto sol = solve_neumann(Potential::square_well(2.0, 1.0), 0.4, 1e4, 0.55);
    auto part = MomentumPartition::make(1e4, 0.55, 0.01);
    auto idx = shell_counts(4096);
    CHECK_THROWS_AS(build_table(sol, part, idx, 4096, 1024), certificate_error);
  }
}

TEST_CASE("norm table") {
  SECTION("zero potential: eta and sigma norms vanish, gamma counts points") {
    auto sol = solve_neumann(Potential::zero(), 0.4, 1e4, 0.55);
    auto part = MomentumPartition::make(1e4, 0.55, 0.01);
    auto idx = shell_counts(1024);
    auto t = build_table(sol, part, idx, 1024);
    auto nt = norm_table(t, sol);
    CHECK(nt.eta_Lc_sq == 0.0);
    CHECK(nt.sigma_L_sq == 0.0);
    // |P_L| lattice points
    std::int64_t count = 0;
    for (std::int64_t n = 1; n <= 1024; ++n)
      if (kTwoPiSq * static_cast<double>(n) <= part.l_hi_sq) count += idx.r3(n);
    CHECK(nt.gamma_L_sq == static_cast<double>(count));
  }

  SECTION("undersized table refuses, naming the norm") {
    auto V = Potential::square_well(2.0, 1.0);
    auto sol = solve_neumann(V, 0.4, 1e4, 0.55);
    auto part = MomentumPartition::make(1e4, 0.55, 0.01);
    auto idx = shell_counts(256);
    auto t = build_table(sol, part, idx, 256);
    try {
      norm_table(t, sol);
      FAIL("expected refusal");
    } catch (const certificate_error& e) {
      CHECK(std::string(e.what()).find("eta") != std::string::npos);
    }
  }

  SECTION("split-and-recombine stability of the shell sums") {
    auto tw = make_default(1e4);
    Kahan whole, lo, hi;
    std::int64_t mid = tw.table.max_n / 2;
    for (const auto& r : tw.table.rows) {
      if (r.cls == MClass::LminusS || r.cls == MClass::S) continue;
      double term = static_cast<double>(r.r3) * r.eta * r.eta;
      whole.add(term);
      (r.n <= mid ? lo : hi).add(term);
    }
    double recombined = lo.value() + hi.value();
    CHECK(std::abs(recombined - whole.value()) <= 1e-9 * std::abs(whole.value()));
  }

  SECTION("envelope really bounds eta at the cutoff") {
    auto tw = make_default(1e4);
    auto V = Potential::square_well(2.0, 1.0);
    auto sol = solve_neumann(V, 0.4, 1e4, 0.55);
    for (std::int64_t n : {tw.table.max_n / 2, tw.table.max_n}) {
      if (!tw.index.r3(n)) continue;
      double p = kTwoPi * std::sqrt(static_cast<double>(n));
      CHECK(std::abs(sol.eta_at_psq(p * p)) <= sol.eta_envelope(p) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("fit_exponent") {
  SECTION("exact power law") {
    std::vector<std::pair<double, double>> rows;
    for (double N : {1e3, 1e4, 1e5, 1e6}) rows.push_back({N, N * N});
    auto f = fit_exponent(rows);
    CHECK(f.slope == Catch::Approx(2.0).margin(1e-12));
    CHECK(f.r2 == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("perturbed power law") {
    std::vector<std::pair<double, double>> rows;
    for (double N : {1e3, 1e4, 1e5, 1e6}) rows.push_back({N, N * N * (1.0 + 1.0 / N)});
    auto f = fit_exponent(rows);
    CHECK(f.slope == Catch::Approx(2.0).margin(1e-2));
  }
  SECTION("error paths") {
    CHECK_THROWS_AS(fit_exponent({{1e3, 1.0}, {1e4, 2.0}}), precondition_error);
    CHECK_THROWS_AS(fit_exponent({{1e3, 1.0}, {1e4, -2.0}, {1e5, 3.0}}), precondition_error);
  }
}

TEST_CASE("norm scaling across N follows the expected exponents", "[sweep]") {
  // kappa = 0.55, eps = 0.01; the acceptance sweep extends this to N = 1e6
  const double kappa = 0.55;
  std::vector<std::pair<double, double>> sL, sLH1, etaH;
  for (double N : {1e3, 1e4, 1e5}) {
    auto tw = make_default(N);
    sL.push_back({N, tw.norms.sigma_L_sq});
    sLH1.push_back({N, tw.norms.sigma_L_H1_sq});
    etaH.push_back({N, tw.norms.eta_H_sq});
  }
  auto f1 = fit_exponent(sL);
  auto f2 = fit_exponent(sLH1);
  auto f3 = fit_exponent(etaH);
  INFO("sigma_L^2 slope " << f1.slope << " (target " << 1.5 * kappa << ")");
  INFO("sigma_L_H1^2 slope " << f2.slope << " (target " << 2.5 * kappa << ")");
  INFO("eta_H^2 slope " << f3.slope << " (target " << 3.0 * kappa - 1.0 + 0.01 << ")");
  CHECK(std::abs(f1.slope - 1.5 * kappa) < 0.2);
  CHECK(std::abs(f2.slope - 2.5 * kappa) < 0.25);
  CHECK(std::abs(f3.slope - (3.0 * kappa - 1.0 + 0.01)) < 0.25);
}
