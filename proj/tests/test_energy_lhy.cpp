#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lhylab/energy_lhy.hpp"

using namespace lhylab;

TEST_CASE("integrand limits and stability") {
  SECTION("free gas vanishes") {
    CHECK(lhy_integrand(1.0, 0.0) == 0.0);
    CHECK(lhy_integrand(1e6, 0.0) == 0.0);
  }

  SECTION("pole at the origin is refused") {
    CHECK_THROWS_AS(lhy_integrand(0.0, 1.0), precondition_error);
  }

  SECTION("large |v|: F v^4 -> (16 pi a)^3 / 16, ratio 16 per doubling") {
    const double a = 1.0;
    double f1 = lhy_integrand(1e6, a);         // |v| = 1e3
    double f2 = lhy_integrand(4e6, a);         // |v| = 2e3
    CHECK(f1 / f2 == Catch::Approx(16.0).epsilon(1e-3));
    double limit = std::pow(16.0 * M_PI * a, 3) / 16.0;
    CHECK(lhy_integrand(1e8, a) * 1e16 == Catch::Approx(limit).epsilon(1e-3));
    // the pointwise bound really dominates
    for (double v_sq : {0.01, 1.0, 100.0, 1e6, 1e12}) {
      CHECK(lhy_integrand(v_sq, a) <= lhy_integrand_bound(v_sq, a));
    }
  }

  SECTION("small |v|: F v^2 -> (8 pi a)^2 / 2") {
    const double a = 1.0;
    double target = 0.5 * std::pow(8.0 * M_PI * a, 2);
    CHECK(lhy_integrand(1e-6, a) * 1e-6 == Catch::Approx(target).epsilon(1e-4));
  }

  SECTION("no catastrophic cancellation at extreme v (finite and positive)") {
    for (double v_sq = 1.0; v_sq < 1e30; v_sq *= 1e3) {
      double f = lhy_integrand(v_sq, 1.0);
      REQUIRE(std::isfinite(f));
      REQUIRE(f > 0.0);
    }
  }
}

TEST_CASE("closed integral against independent quadrature") {
  SECTION("a = 1: 512 sqrt(pi) / 15") {
    auto r = lhy_integral(1.0);
    double expect = 512.0 * std::sqrt(M_PI) / 15.0;
    CHECK(r.closed == Catch::Approx(expect).epsilon(1e-14));
    CHECK(std::abs(r.quadrature - r.closed) / r.closed < 1e-6);
  }

  SECTION("a = 0 gives zero") {
    auto r = lhy_integral(0.0);
    CHECK(r.closed == 0.0);
    CHECK(r.quadrature == 0.0);
  }

  SECTION("homogeneity of degree 5/2") {
    auto r1 = lhy_integral(0.7);
    auto r4 = lhy_integral(2.8);
    CHECK(r4.closed / r1.closed == Catch::Approx(32.0).epsilon(1e-12));
    // property over a range of scalings
    for (double s : {0.3, 2.0, 5.5}) {
      auto rs = lhy_integral(0.7 * s);
      CHECK(rs.closed / r1.closed == Catch::Approx(std::pow(s, 2.5)).epsilon(1e-10));
    }
  }
}

TEST_CASE("riemann sum") {
  SECTION("a = 0 gives zero") {
    auto r = lhy_riemann_sum_h(0.0, 0.25, 30.0);
    CHECK(r.value == 0.0);
  }

  SECTION("preconditions") {
    CHECK_THROWS_AS(lhy_riemann_sum_h(1.0, 1.5, 30.0), precondition_error);
    CHECK_THROWS_AS(lhy_riemann_sum_h(1.0, 0.25, 0.5), precondition_error);
  }

  SECTION("undersized cutoff is refused with a certificate") {
    CHECK_THROWS_AS(lhy_riemann_sum_h(1.0, 0.25, 20.0, nullptr, 1e-4), certificate_error);
  }

  SECTION("halving h decreases the deviation from the closed form monotonically") {
    const double a = 1.0;
    double closed = lhy_integral(a).closed;
    const double cutoff = 150.0;
    double prev = 1e300;
    for (double h : {0.4, 0.2, 0.1}) {
      auto r = lhy_riemann_sum_h(a, h, cutoff);
      double dev = std::abs(r.normalized() - closed) / closed;
      INFO("h = " << h << ": normalized " << r.normalized() << " vs " << closed
                  << " dev " << dev);
      CHECK(dev < prev);
      prev = dev;
    }
    CHECK(prev < 0.05);
  }
}

TEST_CASE("thermodynamic prediction") {
  SECTION("dilute limit is the mean-field term") {
    auto p = predicted_upper_bound(1e-9, 0.5);
    CHECK(p.main_term == Catch::Approx(4.0 * M_PI * 1e-18 * 0.5).epsilon(1e-4));
  }

  SECTION("gamma = 11/10 exponents") {
    auto p = predicted_upper_bound(1e-4, 0.5, 1.1);
    CHECK(p.kappa == Catch::Approx(1.2 / 2.3).epsilon(1e-12));
    CHECK(p.error_exponent == Catch::Approx(2.6).epsilon(1e-12));
  }

  SECTION("second-order fraction at rho a^3 = 1e-6") {
    // (128 / 15 sqrt(pi)) * 1e-3
    auto p = predicted_upper_bound(1e-6, 1.0);
    double frac = p.second_order / (p.main_term - p.second_order);
    CHECK(frac == Catch::Approx(128.0 / (15.0 * std::sqrt(M_PI)) * 1e-3).epsilon(1e-12));
    CHECK(frac == Catch::Approx(4.8144e-3).epsilon(1e-4));
  }

  SECTION("preconditions") {
    CHECK_THROWS_AS(predicted_upper_bound(2.0, 1.0), precondition_error);
    CHECK_THROWS_AS(predicted_upper_bound(1e-4, 0.5, 1.0), precondition_error);
  }
}
