#pragma once

// Real-branch special functions behind the closed-form allocations:
// the principal Lambert-W branch and log-gamma.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wpc {

/// Principal branch W0 of the Lambert-W function, the inverse of w*e^w on
/// [-1/e, inf). Halley iteration from ln(1+x) (x >= 0) or a branch-point
/// series (x < 0); stops at residual 1e-14*max(1,|x|) or 50 iterations.
/// Throws std::domain_error for x < -1/e - 1e-12.
inline double lambert_w0(double x) {
  const double branch_point = -std::exp(-1.0);
  if (std::isnan(x)) return x;
  if (x < branch_point - 1e-12)
    throw std::domain_error("lambert_w0: argument below -1/e");
  if (x <= branch_point) return -1.0;  // derivative is infinite at the branch
  if (x == 0.0) return 0.0;

  double w;
  if (x >= 0.0) {
    w = std::log1p(x);
  } else if (x < -0.25) {
    // series in p = sqrt(2(e*x + 1)) about the branch point
    const double p = std::sqrt(2.0 * (std::exp(1.0) * x + 1.0));
    w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
  } else {
    w = x;  // W0(x) = x - x^2 + ... for small |x|
  }

  const double tol = 1e-14 * std::max(1.0, std::abs(x));
  for (int iter = 0; iter < 50; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    if (std::abs(f) <= tol) break;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    double next = w - f / denom;
    if (next < -1.0) next = 0.5 * (w - 1.0);  // stay on the principal branch
    if (next == w) break;
    w = next;
  }
  return w < -1.0 ? -1.0 : w;
}

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
  return std::lgamma(x);
}

}  // namespace wpc
