#pragma once

// Deterministic expectations of functionals of the channel gain over
// (0, inf). The integral is split at the unit gain: the lower part is
// mapped through x = t^q to absorb the x^(m-3) endpoint behaviour of the
// delay integrands, the upper part through x = 1 + u/(1-u).

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wpc/channel.hpp"
#include "wpc/errors.hpp"

namespace wpc {

struct ExpectationResult {
  double value;
  double abs_error_estimate;
  double mass_below_split;  // contribution of gains in (0, 1]
  double mass_above_split;  // contribution of gains in (1, inf)
};

// Delay/power integrands of the single-user problems grow like x^-2 as the
// gain vanishes; they are only integrable against the fading density for
// m > 2 and must be flagged endpoint_singular.
enum class IntegrandKind { smooth, endpoint_singular };

/// True iff averages of the delay integrands exist (m > 2).
inline bool check_convergence(FadingModel fading) { return fading.m > 2.0; }

namespace detail {

// 15-point Gauss-Kronrod rule on [a, b]; returns {integral, error estimate}.
template <class F>
inline void gauss_kronrod_15(const F& f, double a, double b, double& integral,
                             double& error) {
  static const double xgk[8] = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static const double wgk[8] = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static const double wg[4] = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kron = wgk[7] * fc;
  double gauss = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double flo = f(center - half * xgk[j]);
    const double fhi = f(center + half * xgk[j]);
    kron += wgk[j] * (flo + fhi);
    if (j % 2 == 1) gauss += wg[j / 2] * (flo + fhi);
  }
  integral = kron * half;
  error = std::abs((kron - gauss) * half);
}

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// Adaptive subdivision on [a, b]: repeatedly split the panel with the
// largest error estimate until the total drops below tol.
template <class F>
inline void adaptive(const F& f, double a, double b, double tol,
                     double& value, double& error) {
  constexpr int kMaxPanels = 4000;
  std::vector<Panel> heap;
  auto push = [&](double lo, double hi) {
    Panel p{lo, hi, 0.0, 0.0};
    gauss_kronrod_15(f, lo, hi, p.value, p.error);
    heap.push_back(p);
    std::push_heap(heap.begin(), heap.end());
  };
  push(a, b);
  double total_error = heap.front().error;
  while (total_error > tol && static_cast<int>(heap.size()) < kMaxPanels) {
    std::pop_heap(heap.begin(), heap.end());
    const Panel worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // interval can no longer be split in double precision
      heap.push_back(worst);
      std::push_heap(heap.begin(), heap.end());
      break;
    }
    push(worst.a, mid);
    push(mid, worst.b);
    total_error = 0.0;
    for (const Panel& p : heap) total_error += p.error;
  }
  value = 0.0;
  error = 0.0;
  for (const Panel& p : heap) {
    value += p.value;
    error += p.error;
  }
  if (error > tol)
    throw accuracy_error("quadrature: tolerance unreachable within budget");
}

}  // namespace detail

/// Expectation of g over the unit-mean Nakagami-m gain distribution,
/// E{g(h)} = int_0^inf g(x) f_h(x) dx, with estimated absolute error <= tol.
/// Throws convergence_guard_error for endpoint-singular integrands when
/// m <= 2 and accuracy_error when tol is unreachable.
inline ExpectationResult expect(const std::function<double(double)>& g,
                                FadingModel fading, double tol = 1e-8,
                                IntegrandKind kind = IntegrandKind::smooth) {
  const double m = fading.m;
  if (!(m > 0.0)) throw std::domain_error("expect: m must be > 0");
  if (!(tol > 0.0)) throw std::domain_error("expect: tol must be > 0");
  if (kind == IntegrandKind::endpoint_singular && !check_convergence(fading))
    throw convergence_guard_error(
        "expect: average diverges for m <= 2 (endpoint-singular integrand)");

  const double log_norm = m * std::log(m) - log_gamma(m);
  const bool singular = kind == IntegrandKind::endpoint_singular;
  auto integrand = [&, log_norm, m, singular](double x) -> double {
    if (!(x > 0.0)) return 0.0;
    if (singular && x <= 1e-12) return 0.0;  // analytic limit at the endpoint
    const double logw = log_norm + (m - 1.0) * std::log(x) - m * x;
    if (logw < -745.0) return 0.0;  // weight underflows
    return g(x) * std::exp(logw);
  };

  // x = t^q flattens the endpoint: the worst integrand class x^(m-3)
  // becomes t^(q(m-2)-1).
  int q;
  if (singular)
    q = std::clamp(static_cast<int>(std::ceil(4.0 / (m - 2.0))), 1, 8);
  else
    q = std::clamp(static_cast<int>(std::ceil(2.0 / m)), 1, 8);

  auto lower = [&](double t) -> double {
    const double x = std::pow(t, q);
    const double v = integrand(x);
    return v == 0.0 ? 0.0 : v * q * std::pow(t, q - 1);
  };
  auto upper = [&](double u) -> double {
    const double om = 1.0 - u;
    const double v = integrand(1.0 + u / om);
    return v == 0.0 ? 0.0 : v / (om * om);
  };

  ExpectationResult r{};
  double err_lo = 0.0, err_hi = 0.0;
  detail::adaptive(lower, 0.0, 1.0, 0.5 * tol, r.mass_below_split, err_lo);
  detail::adaptive(upper, 0.0, 1.0, 0.5 * tol, r.mass_above_split, err_hi);
  r.value = r.mass_below_split + r.mass_above_split;
  r.abs_error_estimate = err_lo + err_hi;
  return r;
}

}  // namespace wpc
