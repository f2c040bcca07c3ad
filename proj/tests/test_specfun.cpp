#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wpc/specfun.hpp"

namespace {

// Independent oracle: bisection on w*e^w = x over a bracketing interval.
double lambert_w0_bisection(double x, double lo, double hi) {
  auto f = [x](double w) { return w * std::exp(w) - x; };
  REQUIRE(f(lo) <= 0.0);
  REQUIRE(f(hi) >= 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double residual(double w, double x) {
  return std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x));
}

}  // namespace

TEST_CASE("lambert_w0 fixed points") {
  CHECK(wpc::lambert_w0(0.0) == 0.0);
  CHECK_THAT(wpc::lambert_w0(std::exp(1.0)),
             Catch::Matchers::WithinAbs(1.0, 1e-14));
  CHECK(wpc::lambert_w0(-std::exp(-1.0)) == -1.0);
}

TEST_CASE("lambert_w0 matches the bisection oracle at x = 10") {
  const double oracle = lambert_w0_bisection(10.0, 0.0, 10.0);
  CHECK_THAT(wpc::lambert_w0(10.0),
             Catch::Matchers::WithinRel(oracle, 1e-12));
}

TEST_CASE("lambert_w0 defining residual over the domain") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> expo(-6.0, 6.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::pow(10.0, expo(rng));
    CHECK(residual(wpc::lambert_w0(x), x) <= 1e-12);
  }
  // negative part of the domain, branch point excluded
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double e_inv = std::exp(-1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = -e_inv + e_inv * unif(rng);
    const double w = wpc::lambert_w0(x);
    CHECK(w >= -1.0);
    CHECK(residual(w, x) <= 1e-12);
  }
  CHECK(residual(wpc::lambert_w0(1e6), 1e6) <= 1e-12);
  CHECK(residual(wpc::lambert_w0(1e-300), 1e-300) <= 1e-12);
}

TEST_CASE("lambert_w0 is strictly increasing") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> unif(-std::exp(-1.0), 20.0);
  for (int i = 0; i < 1000; ++i) {
    double a = unif(rng), b = unif(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-9) continue;
    CHECK(wpc::lambert_w0(a) < wpc::lambert_w0(b));
  }
}

TEST_CASE("lambert_w0 rejects arguments below the branch point") {
  CHECK_THROWS_AS(wpc::lambert_w0(-std::exp(-1.0) - 1e-9), std::domain_error);
  // within the documented slack the branch value is returned
  CHECK(wpc::lambert_w0(-std::exp(-1.0) - 0.5e-12) == -1.0);
}

TEST_CASE("log_gamma known values") {
  CHECK(wpc::log_gamma(1.0) == 0.0);
  CHECK_THAT(wpc::log_gamma(5.0),
             Catch::Matchers::WithinRel(std::log(24.0), 1e-12));
  CHECK_THAT(wpc::log_gamma(0.5),
             Catch::Matchers::WithinRel(0.5 * std::log(std::acos(-1.0)), 1e-12));
}

TEST_CASE("log_gamma recurrence Gamma(x+1) = x Gamma(x)") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.5, 50.0);
  for (int i = 0; i < 500; ++i) {
    const double x = unif(rng);
    const double lhs = std::exp(wpc::log_gamma(x + 1.0) - wpc::log_gamma(x));
    CHECK_THAT(lhs, Catch::Matchers::WithinRel(x, 1e-10));
  }
}

TEST_CASE("log_gamma rejects nonpositive arguments") {
  CHECK_THROWS_AS(wpc::log_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(wpc::log_gamma(-3.5), std::domain_error);
}
