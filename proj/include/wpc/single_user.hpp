#pragma once

// Per-realization optimal time/power allocations and fading-averaged delays
// for the four single-user problems:
//   P1: equal slots, unit power        P2: equal slots, power allocation
//   P3: free slots,  unit power        P4: free slots,  power allocation
// P2 and P4 price the average-power constraint E{beta} <= 1 with a
// multiplier mu calibrated so that E{beta*(mu)} = 1.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "wpc/channel.hpp"
#include "wpc/errors.hpp"
#include "wpc/montecarlo.hpp"
#include "wpc/quadrature.hpp"
#include "wpc/specfun.hpp"

namespace wpc {

struct SystemParams {
  double bandwidth_hz;  // B
  double payload_bits;  // R0
  double snr;           // a0, linear
  FadingModel fading;
};

struct Allocation {
  double t1;         // DL energy-transfer duration [s]
  double t2;         // UL data duration [s]
  double beta;       // HAP power coefficient
  double rate_bits;  // bits deliverable in t2
  double delay() const { return t1 + t2; }
};

struct MultiplierState {
  double mu;                    // average-power multiplier
  double calibration_residual;  // |E{beta*} - 1| at acceptance
};

enum class P4Mode { exact, approx };

inline void validate(const SystemParams& p) {
  if (!(p.bandwidth_hz > 0.0 && p.payload_bits > 0.0 && p.snr > 0.0 &&
        p.fading.m > 0.0))
    throw std::domain_error("SystemParams: fields must be strictly positive");
}

inline void require_gain(ChannelGain g) {
  if (!(g.h > 0.0))
    throw std::domain_error("degenerate channel: gain must be > 0");
}

/// Bits the node can push in t2 after harvesting for t1 at power beta*P_h.
inline double uplink_rate_bits(const SystemParams& p, ChannelGain g,
                               double beta, double t1, double t2) {
  return p.bandwidth_hz * t2 *
         std::log2(1.0 + beta * p.snr * g.h * g.h * t1 / t2);
}

namespace detail {

// Unique t2 > 0 with B*t2*log2(1 + c*t1/t2) = R0 for fixed t1 (c = beta*a*h^2).
// The rate saturates at B*c*t1/ln2 as t2 grows, so with s = R0*ln2/(B*c*t1)
// a solution exists iff s < 1; otherwise +inf is returned. Substituting
// u = c*t1/t2 reduces the equation to log1p(u) = s*u, solved by a
// bracketed Newton iteration on the decreasing branch.
inline double ul_slot(double c, double t1, double bandwidth, double payload) {
  const double s = payload * std::numbers::ln2 / (bandwidth * c * t1);
  if (!(s < 1.0)) return std::numeric_limits<double>::infinity();
  double lo = 1.0 / s - 1.0;  // phi is maximal here, phi(lo) > 0
  double hi = std::max(2.0 * lo, 2.0);
  while (std::log1p(hi) - s * hi > 0.0) {
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  double u = hi;
  for (int iter = 0; iter < 100; ++iter) {
    const double phi = std::log1p(u) - s * u;
    if (phi == 0.0) break;
    if (phi < 0.0)
      hi = u;
    else
      lo = u;
    const double dphi = 1.0 / (1.0 + u) - s;
    double next = dphi != 0.0 ? u - phi / dphi : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-15 * u) {
      u = next;
      break;
    }
    u = next;
  }
  return c * t1 / u;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// P1: T1 = T2 = T0, beta = 1.

/// T0* = R0 / (B log2(1 + a0 h^2)); the delay is 2*T0*.
inline Allocation solve_p1(const SystemParams& p, ChannelGain g) {
  validate(p);
  require_gain(g);
  const double t0 =
      p.payload_bits / (p.bandwidth_hz * std::log2(1.0 + p.snr * g.h * g.h));
  return {t0, t0, 1.0, uplink_rate_bits(p, g, 1.0, t0, t0)};
}

/// Fading average of the P1 delay; exactly proportional to R0.
inline DelayStats avg_td_p1(const SystemParams& p, double tol = 1e-8) {
  validate(p);
  const double b = p.bandwidth_hz, a0 = p.snr;
  auto shape = [b, a0](double x) {
    return 2.0 / (b * std::log2(1.0 + a0 * x * x));
  };
  const ExpectationResult r = expect(shape, p.fading, tol / p.payload_bits,
                                     IntegrandKind::endpoint_singular);
  return {p.payload_bits * r.value, p.payload_bits * r.abs_error_estimate, 0,
          EstimateMethod::quadrature};
}

// ---------------------------------------------------------------------------
// P2: T1 = T2 = T0, beta priced by mu.

namespace detail {
inline double p2_w0(const SystemParams& p, double h2a, double mu) {
  return lambert_w0(std::sqrt(2.0 * std::numbers::ln2 * h2a * p.payload_bits /
                              (p.bandwidth_hz * mu)) /
                    2.0);
}
}  // namespace detail

/// beta* = (e^{2 W0(sqrt(2 ln2 a0 h^2 R0 / (B mu)) / 2)} - 1) / (a0 h^2);
/// equivalently the root of (1+beta a0 h^2) ln^2(1+beta a0 h^2) =
/// 2 ln2 a0 h^2 R0 / (B mu).
inline double p2_beta(const SystemParams& p, ChannelGain g, double mu) {
  validate(p);
  require_gain(g);
  if (!(mu > 0.0)) throw std::domain_error("p2_beta: mu must be > 0");
  const double h2a = p.snr * g.h * g.h;
  return std::expm1(2.0 * detail::p2_w0(p, h2a, mu)) / h2a;
}

inline Allocation solve_p2(const SystemParams& p, ChannelGain g,
                           const MultiplierState& state) {
  validate(p);
  require_gain(g);
  if (!(state.mu > 0.0))
    throw std::domain_error("solve_p2: calibrated state required");
  const double h2a = p.snr * g.h * g.h;
  const double w = detail::p2_w0(p, h2a, state.mu);
  const double t0 =
      p.payload_bits * std::numbers::ln2 / (2.0 * p.bandwidth_hz * w);
  const double beta = std::expm1(2.0 * w) / h2a;
  return {t0, t0, beta, uplink_rate_bits(p, g, beta, t0, t0)};
}

namespace detail {

inline double p2_mean_beta(const SystemParams& p, double mu, double tol) {
  const double a0 = p.snr;
  auto g = [&p, a0, mu](double x) {
    const double h2a = a0 * x * x;
    return std::expm1(2.0 * p2_w0(p, h2a, mu)) / h2a;
  };
  return expect(g, p.fading, tol, IntegrandKind::endpoint_singular).value;
}

// Bisection on a strictly decreasing mu -> E{beta*(mu)}; the bracket is
// grown geometrically from mu = 1 (at most 60 doublings each way).
template <class MeanFn>
MultiplierState calibrate_mu(const MeanFn& mean_beta, double target_tol,
                             const char* what) {
  double mu = 1.0;
  double e = mean_beta(mu);
  if (std::abs(e - 1.0) <= target_tol) return {mu, std::abs(e - 1.0)};

  double lo, hi;
  if (e > 1.0) {  // too much power: raise the price
    lo = mu;
    hi = mu;
    int steps = 0;
    do {
      hi *= 2.0;
      if (++steps > 60)
        throw bracket_error(std::string(what) + ": no bracket above mu=1");
      e = mean_beta(hi);
    } while (e > 1.0);
    lo = hi / 2.0;
  } else {
    lo = mu;
    hi = mu;
    int steps = 0;
    do {
      lo /= 2.0;
      if (++steps > 60)
        throw bracket_error(std::string(what) + ": no bracket below mu=1");
      e = mean_beta(lo);
    } while (e < 1.0);
    hi = lo * 2.0;
  }
  if (std::abs(e - 1.0) <= target_tol)
    return {e > 1.0 ? lo : hi, std::abs(e - 1.0)};

  for (int iter = 0; iter < 200; ++iter) {
    const double mid = std::sqrt(lo * hi);
    e = mean_beta(mid);
    if (std::abs(e - 1.0) <= target_tol) return {mid, std::abs(e - 1.0)};
    if (e > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  throw bracket_error(std::string(what) + ": bisection stalled");
}

}  // namespace detail

/// mu* with |E{beta*(mu*)} - 1| <= 1e-6.
inline MultiplierState calibrate_mu_p2(const SystemParams& p,
                                       double target_tol = 1e-6) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("calibrate_mu_p2: requires m > 2");
  auto mean = [&p](double mu) { return detail::p2_mean_beta(p, mu, 1e-8); };
  return detail::calibrate_mu(mean, target_tol, "calibrate_mu_p2");
}

inline DelayStats avg_td_p2(const SystemParams& p, const MultiplierState& state,
                            double tol = 1e-8) {
  validate(p);
  if (!(state.mu > 0.0))
    throw std::domain_error("avg_td_p2: calibrated state required");
  const double a0 = p.snr;
  auto g = [&p, a0, mu = state.mu](double x) {
    const double w = detail::p2_w0(p, a0 * x * x, mu);
    return p.payload_bits * std::numbers::ln2 / (p.bandwidth_hz * w);
  };
  const ExpectationResult r =
      expect(g, p.fading, tol, IntegrandKind::endpoint_singular);
  return {r.value, r.abs_error_estimate, 0, EstimateMethod::quadrature};
}

// ---------------------------------------------------------------------------
// P3: free slot split, beta = 1.

namespace detail {
// y = 1 + W0((c - 1)/e) = ln(1 + c * T1/T2) at the P3 optimum, c = a0 h^2.
inline double p3_log_rate(double c) {
  return 1.0 + lambert_w0((c - 1.0) / std::numbers::e);
}
}  // namespace detail

/// T2* = R0 ln2 / (B (1 + W0((a0 h^2 - 1)/e))), T1* = T2* (e^{...} - 1)/(a0 h^2).
inline Allocation solve_p3(const SystemParams& p, ChannelGain g) {
  validate(p);
  require_gain(g);
  const double h2a = p.snr * g.h * g.h;
  const double y = detail::p3_log_rate(h2a);
  const double t2 = p.payload_bits * std::numbers::ln2 / (p.bandwidth_hz * y);
  const double t1 = t2 * std::expm1(y) / h2a;
  return {t1, t2, 1.0, uplink_rate_bits(p, g, 1.0, t1, t2)};
}

/// Fading average of the P3 delay; exactly proportional to R0.
inline DelayStats avg_td_p3(const SystemParams& p, double tol = 1e-8) {
  validate(p);
  const double b = p.bandwidth_hz, a0 = p.snr;
  auto shape = [b, a0](double x) {
    const double h2a = a0 * x * x;
    const double y = detail::p3_log_rate(h2a);
    return std::numbers::ln2 / (b * y) * (1.0 + std::expm1(y) / h2a);
  };
  const ExpectationResult r = expect(shape, p.fading, tol / p.payload_bits,
                                     IntegrandKind::endpoint_singular);
  return {p.payload_bits * r.value, p.payload_bits * r.abs_error_estimate, 0,
          EstimateMethod::quadrature};
}

// ---------------------------------------------------------------------------
// P4: free slot split and priced beta.

namespace detail {

// Residual of the P4 power-coefficient equation at fixed mu:
//   (B mu c / (R0 ln2)) beta^2 y(beta) - (e^{y(beta)} - 1),
// y(beta) = 1 + W0((beta c - 1)/e), c = a0 h^2.
inline double p4_residual(const SystemParams& p, double c, double mu,
                          double beta) {
  const double y = 1.0 + lambert_w0((beta * c - 1.0) / std::numbers::e);
  return p.bandwidth_hz * mu * c / (p.payload_bits * std::numbers::ln2) *
             beta * beta * y -
         std::expm1(y);
}

inline Allocation p4_reconstruct(const SystemParams& p, ChannelGain g,
                                 double mu, double beta) {
  const double h2a = p.snr * g.h * g.h;
  const double y = 1.0 + lambert_w0((beta * h2a - 1.0) / std::numbers::e);
  const double t1 = beta * mu;
  const double t2 = beta * beta * mu * h2a / std::expm1(y);
  return {t1, t2, beta, uplink_rate_bits(p, g, beta, t1, t2)};
}

}  // namespace detail

/// Root of the P4 stationarity equation in beta. The residual is scanned
/// over 200 log-spaced points in [1e-8, 1e8]; every sign change is refined
/// by bisection and, should several roots appear, the one with the smallest
/// reconstructed delay wins (bracket_count reports how many were seen).
inline double p4_exact_beta(const SystemParams& p, ChannelGain g, double mu,
                            int* bracket_count = nullptr) {
  validate(p);
  require_gain(g);
  if (!(mu > 0.0)) throw std::domain_error("p4_exact_beta: mu must be > 0");
  const double c = p.snr * g.h * g.h;

  constexpr int kScan = 200;
  const double lo_edge = 1e-8, hi_edge = 1e8;
  const double ratio = std::pow(hi_edge / lo_edge, 1.0 / (kScan - 1));

  double best_beta = 0.0, best_delay = std::numeric_limits<double>::infinity();
  int found = 0;
  double prev_beta = lo_edge;
  double prev_f = detail::p4_residual(p, c, mu, prev_beta);
  for (int i = 1; i < kScan; ++i) {
    const double beta = lo_edge * std::pow(ratio, i);
    const double f = detail::p4_residual(p, c, mu, beta);
    const bool crossed = (prev_f < 0.0 && f >= 0.0) || (prev_f > 0.0 && f <= 0.0);
    if (prev_f == 0.0 || crossed) {
      double a = prev_beta, b = beta;
      double fa = prev_f;
      if (fa == 0.0) {
        b = a;
      } else {
        for (int iter = 0; iter < 200 && (b - a) > 1e-15 * b; ++iter) {
          const double mid = std::sqrt(a * b);
          const double fm = detail::p4_residual(p, c, mu, mid);
          if (fm == 0.0) {
            a = b = mid;
            break;
          }
          if ((fa < 0.0) == (fm < 0.0)) {
            a = mid;
            fa = fm;
          } else {
            b = mid;
          }
        }
      }
      const double root = 0.5 * (a + b);
      const double delay = detail::p4_reconstruct(p, g, mu, root).delay();
      ++found;
      if (delay < best_delay) {
        best_delay = delay;
        best_beta = root;
      }
    }
    prev_beta = beta;
    prev_f = f;
  }
  if (bracket_count) *bracket_count = found;
  if (found == 0)
    throw root_not_found_error(
        "p4_exact_beta: no sign change in [1e-8, 1e8] (h=" +
        std::to_string(g.h) + ", mu=" + std::to_string(mu) + ")");
  return best_beta;
}

/// mu* with |E{beta*(mu*)} - 1| <= 1e-4, beta* solved per gain realization.
inline MultiplierState calibrate_mu_p4_exact(const SystemParams& p,
                                             double target_tol = 1e-4) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("calibrate_mu_p4_exact: requires m > 2");
  auto mean = [&p](double mu) {
    auto g = [&p, mu](double x) {
      return p4_exact_beta(p, ChannelGain{x}, mu);
    };
    return expect(g, p.fading, 1e-6, IntegrandKind::endpoint_singular).value;
  };
  return detail::calibrate_mu(mean, target_tol, "calibrate_mu_p4_exact");
}

/// Closed-form mu* of the approximate P4 solution:
/// mu* = (R0 ln2 / B) * E{sqrt((e^y - 1)/(a0 h^2 y))}^2, y = y(a0 h^2).
inline MultiplierState p4_approx_mu(const SystemParams& p, double tol = 1e-8) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("p4_approx_mu: requires m > 2");
  const double a0 = p.snr;
  auto g = [a0](double x) {
    const double h2a = a0 * x * x;
    const double y = detail::p3_log_rate(h2a);
    return std::sqrt(std::expm1(y) / (h2a * y));
  };
  const ExpectationResult r =
      expect(g, p.fading, tol, IntegrandKind::endpoint_singular);
  const double mu = p.payload_bits * std::numbers::ln2 / p.bandwidth_hz *
                    r.value * r.value;
  return {mu, 0.0};  // E{beta*} = 1 holds identically for this mu
}

/// Approximate beta*: the stationarity equation with the Lambert-W argument
/// frozen at the average power E{beta} = 1.
inline double p4_approx_beta(const SystemParams& p, ChannelGain g, double mu) {
  validate(p);
  require_gain(g);
  if (!(mu > 0.0)) throw std::domain_error("p4_approx_beta: mu must be > 0");
  const double h2a = p.snr * g.h * g.h;
  const double y = detail::p3_log_rate(h2a);
  return std::sqrt(p.payload_bits * std::numbers::ln2 /
                   (mu * p.bandwidth_hz)) *
         std::sqrt(std::expm1(y) / (h2a * y));
}

/// Exact mode reconstructs T1 = beta* mu*, T2 = beta*^2 mu* a0 h^2/(e^y - 1);
/// approx mode keeps T1 = beta* mu* and recovers T2 from the rate equality
/// so the returned allocation is always feasible.
inline Allocation solve_p4(const SystemParams& p, ChannelGain g,
                           const MultiplierState& state,
                           P4Mode mode = P4Mode::exact) {
  validate(p);
  require_gain(g);
  if (!(state.mu > 0.0))
    throw std::domain_error("solve_p4: calibrated state required");
  if (mode == P4Mode::exact) {
    const double beta = p4_exact_beta(p, g, state.mu);
    return detail::p4_reconstruct(p, g, state.mu, beta);
  }
  const double beta = p4_approx_beta(p, g, state.mu);
  const double t1 = beta * state.mu;
  const double t2 = detail::ul_slot(beta * p.snr * g.h * g.h, t1,
                                    p.bandwidth_hz, p.payload_bits);
  return {t1, t2, beta, uplink_rate_bits(p, g, beta, t1, t2)};
}

inline DelayStats avg_td_p4(const SystemParams& p, const MultiplierState& state,
                            P4Mode mode = P4Mode::exact, double tol = 1e-8) {
  validate(p);
  if (!(state.mu > 0.0))
    throw std::domain_error("avg_td_p4: calibrated state required");
  auto g = [&p, &state, mode](double x) {
    return solve_p4(p, ChannelGain{x}, state, mode).delay();
  };
  // The exact-mode integrand runs a root solve per evaluation; 1e-7 keeps
  // the error well under plot resolution at tolerable cost.
  const double qtol = mode == P4Mode::exact ? std::max(tol, 1e-7) : tol;
  const ExpectationResult r =
      expect(g, p.fading, qtol, IntegrandKind::endpoint_singular);
  return {r.value, r.abs_error_estimate, 0, EstimateMethod::quadrature};
}

}  // namespace wpc
