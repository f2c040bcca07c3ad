#pragma once

// Nakagami-m unit-mean channel power-gain model: density, sampling and the
// link-budget-to-SNR conversion.

#include <cmath>
#include <random>
#include <stdexcept>

#include "wpc/specfun.hpp"

namespace wpc {

// Downlink energy-transfer budget. All fields strictly positive, eta <= 1.
struct LinkBudget {
  double eta;     // harvesting efficiency
  double p_h;     // HAP average transmit power [W]
  double d;       // HAP-node distance [m]
  double alpha;   // path-loss exponent
  double sigma2;  // noise power at the HAP [W]
};

struct FadingModel {
  double m;  // Nakagami fading order; averaging paths require m > 2
};

// One realization of the unit-mean channel power gain h = |h0|^2.
struct ChannelGain {
  double h;
};

inline void validate(const LinkBudget& lb) {
  if (!(lb.eta > 0.0 && lb.eta <= 1.0))
    throw std::domain_error("LinkBudget: eta must be in (0, 1]");
  if (!(lb.p_h > 0.0 && lb.d > 0.0 && lb.alpha > 0.0 && lb.sigma2 > 0.0))
    throw std::domain_error("LinkBudget: fields must be strictly positive");
}

/// Average SNR a0 = eta * P_h * d^(-2*alpha) / sigma^2 (linear).
inline double average_snr(const LinkBudget& lb) {
  validate(lb);
  return lb.eta * lb.p_h * std::pow(lb.d, -2.0 * lb.alpha) / lb.sigma2;
}

inline double snr_from_db(double db) { return std::pow(10.0, db / 10.0); }
inline double snr_to_db(double a) { return 10.0 * std::log10(a); }

/// Density of the unit-mean gain: m^m x^(m-1) e^(-m x) / Gamma(m), x > 0.
inline double gain_pdf(double x, FadingModel fading) {
  const double m = fading.m;
  if (!(m > 0.0)) throw std::domain_error("gain_pdf: m must be > 0");
  if (!(x > 0.0)) throw std::domain_error("gain_pdf: x must be > 0");
  return std::exp(m * std::log(m) + (m - 1.0) * std::log(x) - m * x -
                  log_gamma(m));
}

namespace detail {

// Marsaglia-Tsang gamma(shape, 1) sampler; the shape < 1 case boosts
// through shape + 1.
template <class URNG>
double sample_gamma(double shape, URNG& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (shape < 1.0) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  std::normal_distribution<double> norm(0.0, 1.0);
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = norm(rng);
    const double t = 1.0 + c * z;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = unif(rng);
    const double z2 = z * z;
    if (u < 1.0 - 0.0331 * z2 * z2 ||
        std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v)))
      return d * v;
  }
}

}  // namespace detail

/// Draws h with density gain_pdf: a gamma variate with shape m and mean 1.
/// Resamples the measure-zero event h = 0.
template <class URNG>
ChannelGain sample_gain(FadingModel fading, URNG& rng) {
  if (!(fading.m > 0.0)) throw std::domain_error("sample_gain: m must be > 0");
  double h = 0.0;
  do {
    h = detail::sample_gamma(fading.m, rng) / fading.m;
  } while (!(h > 0.0));
  return {h};
}

// Harvested energy at the node after a DL slot of duration t1, and the
// resulting UL transmit power when spent over t2.
inline double harvested_energy(const LinkBudget& lb, double beta,
                               ChannelGain gain, double t1) {
  return lb.eta * beta * lb.p_h * std::pow(lb.d, -lb.alpha) * gain.h * t1;
}

inline double uplink_power(double energy, double t2) { return energy / t2; }

}  // namespace wpc
