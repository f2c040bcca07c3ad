#pragma once

// One HAP and K nodes. P5 splits a common DL slot into K UL slots with
// beta = 1; P6 adds HAP power allocation priced by a multiplier theta that
// is calibrated by a sub-gradient loop over a fixed Monte-Carlo gain panel.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "wpc/channel.hpp"
#include "wpc/errors.hpp"
#include "wpc/montecarlo.hpp"
#include "wpc/single_user.hpp"

namespace wpc {

struct MultiUserParams {
  double bandwidth_hz;      // B
  double payload_bits;      // R0, common to all nodes
  std::vector<double> snr;  // a_k, linear, one entry per node
  FadingModel fading;
};

struct MultiUserAllocation {
  double t1;
  std::vector<double> t2;
  double beta;
  double delay() const {
    double s = t1;
    for (double v : t2) s += v;
    return s;
  }
};

struct SubgradientState {
  double theta = 0.0;
  double step0 = 0.5;          // zeta_i = step0 / sqrt(i)
  std::vector<double> lambda;  // rate multipliers of the last inner solve
  double mu = 0.0;             // slot-sum multiplier of the last inner solve
  int iteration = 0;
  double residual = 0.0;  // |E{beta*} - 1| at acceptance
};

inline void validate(const MultiUserParams& p) {
  if (p.snr.empty() || p.snr.size() > 64)
    throw std::domain_error("MultiUserParams: need 1..64 nodes");
  if (!(p.bandwidth_hz > 0.0 && p.payload_bits > 0.0 && p.fading.m > 0.0))
    throw std::domain_error("MultiUserParams: fields must be strictly positive");
  for (double a : p.snr)
    if (!(a > 0.0))
      throw std::domain_error("MultiUserParams: all a_k must be > 0");
}

/// UL slot of one node for a given DL duration: the unique t2 > 0 with
/// B t2 log2(1 + a_k h_k^2 t1/t2) = R0 (+inf when the energy-limited rate
/// cap B a_k h_k^2 t1 / ln2 falls below the payload).
inline double ul_slot_for_t1(double snr_times_gain, double t1,
                             const MultiUserParams& p) {
  validate(p);
  if (!(snr_times_gain > 0.0 && t1 > 0.0))
    throw std::domain_error("ul_slot_for_t1: need positive gain and t1");
  return detail::ul_slot(snr_times_gain, t1, p.bandwidth_hz, p.payload_bits);
}

/// P5: beta = 1; t1 solves sum_k t2_k(t1) = t1 by outer bisection (the sum
/// is strictly decreasing in t1). Total delay is 2 t1.
inline MultiUserAllocation solve_p5(const MultiUserParams& p,
                                    const std::vector<ChannelGain>& gains) {
  validate(p);
  const int k = static_cast<int>(p.snr.size());
  if (static_cast<int>(gains.size()) != k)
    throw std::domain_error("solve_p5: one gain per node required");
  std::vector<double> c(k);
  double t1_min = 0.0;
  for (int i = 0; i < k; ++i) {
    require_gain(gains[i]);
    c[i] = p.snr[i] * gains[i].h * gains[i].h;
    t1_min = std::max(
        t1_min, p.payload_bits * std::numbers::ln2 / (p.bandwidth_hz * c[i]));
  }
  auto excess = [&](double t1) {
    double s = -t1;
    for (int i = 0; i < k; ++i)
      s += detail::ul_slot(c[i], t1, p.bandwidth_hz, p.payload_bits);
    return s;
  };
  double lo = std::max(t1_min * (1.0 + 1e-12), 1e-12);
  if (lo > 1e12 || !(excess(lo) > 0.0))
    throw bracket_error("solve_p5: no crossing within [1e-12, 1e12] s");
  double hi = std::max(2.0 * lo, 1e-9);
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e12)
      throw bracket_error("solve_p5: no crossing within [1e-12, 1e12] s");
  }
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  MultiUserAllocation out;
  out.t1 = 0.5 * (lo + hi);
  out.beta = 1.0;
  out.t2.resize(k);
  for (int i = 0; i < k; ++i)
    out.t2[i] = detail::ul_slot(c[i], out.t1, p.bandwidth_hz, p.payload_bits);
  return out;
}

struct P6Solution {
  MultiUserAllocation alloc;
  std::vector<double> lambda;
  double mu = 0.0;
  int newton_iterations = 0;
  double residual_norm = 0.0;
  std::vector<double> z;  // internal state, reusable as a warm start
};

namespace detail {

// Stationarity-plus-feasibility system for P6 at fixed theta. Unknowns
// z = [ln t1, ln t2_1..K, ln beta, lambda_1..K, mu], 2K+3 of them:
//   mu + sum_k lambda_k (B/ln2) c_k beta / (1 + z_k)                 = 1
//   -mu + lambda_k ((B/ln2) ln(1+z_k) - (B/ln2) z_k/(1+z_k))         = 1
//   sum_k lambda_k (B/ln2) c_k t1 / (1 + z_k)                        = theta
//   B t2_k log2(1 + z_k)                                             = R0
//   sum_k t2_k                                                       = t1
// with z_k = c_k beta t1 / t2_k. Rate residuals are scaled by R0, the sum
// residual by t1, the theta residual by max(1, theta).
struct P6System {
  double bandwidth;
  double payload;
  double theta;
  std::vector<double> c;  // a_k h_k^2

  int k() const { return static_cast<int>(c.size()); }
  int dim() const { return 2 * k() + 3; }

  void residual(const std::vector<double>& z, std::vector<double>& r) const {
    const int K = k();
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    const double t1 = std::exp(z[0]);
    const double beta = std::exp(z[1 + K]);
    const double mu = z[2 * K + 2];
    double stat_t1 = mu;
    double stat_beta = 0.0;
    double sum_t2 = 0.0;
    for (int i = 0; i < K; ++i) {
      const double t2 = std::exp(z[1 + i]);
      const double lam = z[2 + K + i];
      const double zk = c[i] * beta * t1 / t2;
      const double log_term = std::log1p(zk);
      const double frac = zk / (1.0 + zk);
      stat_t1 += lam * bandwidth * inv_ln2 * c[i] * beta / (1.0 + zk);
      r[1 + i] = -mu + lam * bandwidth * inv_ln2 * (log_term - frac) - 1.0;
      stat_beta += lam * bandwidth * inv_ln2 * c[i] * t1 / (1.0 + zk);
      r[K + 2 + i] = (bandwidth * t2 * log_term * inv_ln2 - payload) / payload;
      sum_t2 += t2;
    }
    r[0] = stat_t1 - 1.0;
    r[K + 1] = (stat_beta - theta) / std::max(1.0, theta);
    r[2 * K + 2] = (sum_t2 - t1) / t1;
  }
};

inline double inf_norm(const std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n = std::max(n, std::abs(x));
  return n;
}

// In-place Gaussian elimination with partial pivoting; solves A x = b.
inline bool lu_solve(std::vector<std::vector<double>>& a,
                     std::vector<double>& b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (a[pivot][col] == 0.0) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (int row = col + 1; row < n; ++row) {
      const double f = a[row][col] / a[col][col];
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a[row][j] -= f * a[col][j];
      b[row] -= f * b[col];
    }
  }
  for (int row = n - 1; row >= 0; --row) {
    double s = b[row];
    for (int j = row + 1; j < n; ++j) s -= a[row][j] * b[j];
    b[row] = s / a[row][row];
  }
  return true;
}

}  // namespace detail

/// Solves the 2K+3 stationarity/feasibility equations of P6 at the given
/// theta by damped Newton, initialized from the P5 allocation with beta = 1
/// and multipliers from the P5 stationarity conditions. A previous solution
/// for nearby theta may be passed as a warm start.
inline P6Solution solve_p6_inner(const MultiUserParams& p,
                                 const std::vector<ChannelGain>& gains,
                                 double theta,
                                 const std::vector<double>* warm_start = nullptr,
                                 const MultiUserAllocation* p5_init = nullptr) {
  validate(p);
  if (!(theta >= 0.0)) throw std::domain_error("solve_p6_inner: theta >= 0");
  const int k = static_cast<int>(p.snr.size());
  if (static_cast<int>(gains.size()) != k)
    throw std::domain_error("solve_p6_inner: one gain per node required");

  detail::P6System sys;
  sys.bandwidth = p.bandwidth_hz;
  sys.payload = p.payload_bits;
  sys.theta = theta;
  sys.c.resize(k);
  for (int i = 0; i < k; ++i) {
    require_gain(gains[i]);
    sys.c[i] = p.snr[i] * gains[i].h * gains[i].h;
  }
  const int n = sys.dim();

  std::vector<double> z(n);
  if (warm_start && static_cast<int>(warm_start->size()) == n) {
    z = *warm_start;
  } else {
    MultiUserAllocation base = p5_init ? *p5_init : solve_p5(p, gains);
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    z[0] = std::log(base.t1);
    z[1 + k] = 0.0;  // beta = 1
    double s = 0.0;
    std::vector<double> d(k);
    for (int i = 0; i < k; ++i) {
      z[1 + i] = std::log(base.t2[i]);
      const double zk = sys.c[i] * base.t1 / base.t2[i];
      const double log_term = std::log1p(zk);
      d[i] = p.bandwidth_hz * inv_ln2 * (log_term - zk / (1.0 + zk));
      s += p.bandwidth_hz * inv_ln2 * sys.c[i] / (1.0 + zk) / d[i];
    }
    const double mu0 = (1.0 - s) / (1.0 + s);
    z[2 * k + 2] = mu0;
    for (int i = 0; i < k; ++i) z[2 + k + i] = (1.0 + mu0) / d[i];
  }

  std::vector<double> r(n), r_try(n), z_try(n), step(n);
  std::vector<std::vector<double>> jac(n, std::vector<double>(n));
  sys.residual(z, r);
  double norm = detail::inf_norm(r);

  int iter = 0;
  for (; iter < 200 && norm > 1e-9; ++iter) {
    // central-difference Jacobian
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      const double saved = z[j];
      z[j] = saved + h;
      sys.residual(z, r_try);
      z[j] = saved - h;
      sys.residual(z, z_try);  // reuse as scratch
      z[j] = saved;
      for (int i = 0; i < n; ++i)
        jac[i][j] = (r_try[i] - z_try[i]) / (2.0 * h);
    }
    for (int i = 0; i < n; ++i) step[i] = -r[i];
    auto jac_copy = jac;
    if (!detail::lu_solve(jac_copy, step)) {
      std::ostringstream msg;
      msg << "solve_p6_inner: singular Jacobian at theta=" << theta;
      throw newton_divergence_error(msg.str());
    }
    double alpha = 1.0;
    bool improved = false;
    while (alpha >= std::pow(2.0, -20)) {
      for (int i = 0; i < n; ++i) z_try[i] = z[i] + alpha * step[i];
      sys.residual(z_try, r_try);
      const double norm_try = detail::inf_norm(r_try);
      if (norm_try < norm) {
        z = z_try;
        r = r_try;
        norm = norm_try;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  if (norm > 1e-9) {
    std::ostringstream msg;
    msg << "solve_p6_inner: no convergence (residual " << norm << ", theta "
        << theta << ", gains";
    for (const ChannelGain& g : gains) msg << ' ' << g.h;
    msg << ")";
    throw newton_divergence_error(msg.str());
  }

  P6Solution out;
  out.alloc.t1 = std::exp(z[0]);
  out.alloc.t2.resize(k);
  for (int i = 0; i < k; ++i) out.alloc.t2[i] = std::exp(z[1 + i]);
  out.alloc.beta = std::exp(z[1 + k]);
  out.lambda.assign(z.begin() + 2 + k, z.begin() + 2 + 2 * k);
  out.mu = z[2 * k + 2];
  out.newton_iterations = iter;
  out.residual_norm = norm;
  out.z = std::move(z);
  return out;
}

/// One projected sub-gradient step of the power-price calibration. E{beta*}
/// is strictly decreasing in theta, so the price moves with the constraint
/// violation: theta' = max(0, theta + zeta * (mean_beta - 1)).
inline double subgradient_step(double theta, double zeta, double mean_beta) {
  return std::max(0.0, theta + zeta * (mean_beta - 1.0));
}

struct ThetaOptions {
  double theta0 = 0.0;  // <= 0 requests a warm start from the P2 multiplier
  double zeta0 = 0.5;
  double tol = 1e-3;
  int max_iterations = 500;
};

/// Calibrates theta so the Monte-Carlo average of beta* over a fixed panel
/// of mc_samples gain draws (common random numbers) satisfies
/// |E{beta*} - 1| <= tol. Step schedule: zeta_i = zeta0 * theta0 / sqrt(i).
inline SubgradientState calibrate_theta(const MultiUserParams& p,
                                        long long mc_samples, uint64_t seed,
                                        const ThetaOptions& opt = {}) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("calibrate_theta: requires m > 2");
  if (mc_samples < 1000)
    throw std::invalid_argument("calibrate_theta: need mc_samples >= 1000");

  const int k = static_cast<int>(p.snr.size());
  auto rng = detail::substream(seed, 0);
  std::vector<std::vector<ChannelGain>> panel(mc_samples);
  std::vector<double> draw;
  for (auto& gains : panel) {
    detail::draw_gain_vector(p.fading, k, rng, draw);
    gains.resize(k);
    for (int i = 0; i < k; ++i) gains[i] = {draw[i]};
  }

  // P5 does not depend on theta: solve it once per panel realization.
  std::vector<MultiUserAllocation> base(panel.size());
  for (size_t i = 0; i < panel.size(); ++i) base[i] = solve_p5(p, panel[i]);

  double theta0 = opt.theta0;
  if (!(theta0 > 0.0)) {
    // The single-user power price at the mean SNR has the right scale.
    double mean_snr = 0.0;
    for (double a : p.snr) mean_snr += a;
    mean_snr /= k;
    SystemParams sp{p.bandwidth_hz, p.payload_bits, mean_snr, p.fading};
    theta0 = calibrate_mu_p2(sp).mu;
  }

  std::vector<std::vector<double>> warm(panel.size());
  P6Solution last;
  double theta = theta0;
  std::vector<double> trace;
  const long long allowed_failures = mc_samples / 1000;

  for (int i = 1; i <= opt.max_iterations; ++i) {
    double sum_beta = 0.0;
    long long ok = 0, failed = 0;
    std::string first_failure;
    for (size_t s = 0; s < panel.size(); ++s) {
      try {
        P6Solution sol = solve_p6_inner(
            p, panel[s], theta, warm[s].empty() ? nullptr : &warm[s],
            &base[s]);
        warm[s] = sol.z;
        sum_beta += sol.alloc.beta;
        ++ok;
        last = std::move(sol);
      } catch (const std::exception& e) {
        ++failed;
        if (first_failure.empty()) first_failure = e.what();
        if (failed > allowed_failures)
          throw simulation_error(
              "calibrate_theta: inner-solver failure rate above 0.1%; first: " +
              first_failure);
      }
    }
    const double mean_beta = sum_beta / static_cast<double>(ok);
    const double err = mean_beta - 1.0;
    trace.push_back(err);
    if (std::abs(err) <= opt.tol) {
      SubgradientState out;
      out.theta = theta;
      out.step0 = opt.zeta0 * theta0;
      out.lambda = last.lambda;
      out.mu = last.mu;
      out.iteration = i;
      out.residual = std::abs(err);
      return out;
    }
    theta = subgradient_step(theta, opt.zeta0 * theta0 / std::sqrt(i), mean_beta);
    if (theta == 0.0) theta = 1e-12 * theta0;  // keep the price active
  }

  std::ostringstream msg;
  msg << "calibrate_theta: |E{beta}-1| > " << opt.tol << " after "
      << opt.max_iterations << " iterations; residual trace (last 10):";
  const size_t from = trace.size() > 10 ? trace.size() - 10 : 0;
  for (size_t i = from; i < trace.size(); ++i) msg << ' ' << trace[i];
  throw nonconvergence_error(msg.str());
}

/// Monte-Carlo average P5 delay (= 2 t1).
inline DelayStats avg_td_p5(const MultiUserParams& p, long long n,
                            uint64_t seed, int workers = 1) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("avg_td_p5: requires m > 2");
  const int k = static_cast<int>(p.snr.size());
  auto f = [&p](const std::vector<double>& hs) {
    std::vector<ChannelGain> gains(hs.size());
    for (size_t i = 0; i < hs.size(); ++i) gains[i] = {hs[i]};
    return solve_p5(p, gains).delay();
  };
  return estimate(f, p.fading, k, n, seed, workers);
}

/// Monte-Carlo average P6 delay at a calibrated theta.
inline DelayStats avg_td_p6(const MultiUserParams& p, double theta,
                            long long n, uint64_t seed, int workers = 1) {
  validate(p);
  if (!check_convergence(p.fading))
    throw convergence_guard_error("avg_td_p6: requires m > 2");
  if (!(theta >= 0.0)) throw std::domain_error("avg_td_p6: theta >= 0");
  const int k = static_cast<int>(p.snr.size());
  auto f = [&p, theta](const std::vector<double>& hs) {
    std::vector<ChannelGain> gains(hs.size());
    for (size_t i = 0; i < hs.size(); ++i) gains[i] = {hs[i]};
    return solve_p6_inner(p, gains, theta).alloc.delay();
  };
  return estimate(f, p.fading, k, n, seed, workers);
}

}  // namespace wpc
