#pragma once

// Seeded Monte-Carlo engine: sample mean and standard error of a functional
// of one or more channel gains, with streaming accumulation and optional
// worker partitioning.

#include <cmath>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wpc/channel.hpp"
#include "wpc/errors.hpp"

namespace wpc {

enum class EstimateMethod { quadrature, monte_carlo };

struct DelayStats {
  double mean;
  double std_error;
  long long samples;  // accepted samples (monte-carlo only)
  EstimateMethod method;
};

namespace detail {

struct RunningStats {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const RunningStats& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean - mean;
    const long long total = n + o.n;
    mean += d * (static_cast<double>(o.n) / static_cast<double>(total));
    m2 += o.m2 + d * d * (static_cast<double>(n) * static_cast<double>(o.n) /
                          static_cast<double>(total));
    n = total;
  }
};

inline std::mt19937_64 substream(uint64_t seed, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed),
                    static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(index),
                    static_cast<uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Gains at or below this are rejected and redrawn in averaging paths: the
// per-realization delay diverges as h -> 0.
constexpr double kMinAveragingGain = 1e-10;

template <class URNG>
inline void draw_gain_vector(FadingModel fading, int k, URNG& rng,
                             std::vector<double>& out) {
  out.resize(k);
  for (int i = 0; i < k; ++i) {
    double h;
    do {
      h = sample_gain(fading, rng).h;
    } while (h <= kMinAveragingGain);
    out[i] = h;
  }
}

}  // namespace detail

/// Sample mean and standard error of f over n i.i.d. draws of k_nodes
/// independent unit-mean gains. Per-sample solver failures are tallied and
/// excluded; the run aborts if they exceed 0.1% of n. Bit-reproducible for
/// a fixed (seed, n, workers) triple.
template <class F>
DelayStats estimate(F&& f, FadingModel fading, int k_nodes, long long n,
                    uint64_t seed, int workers = 1) {
  if (n < 2) throw std::invalid_argument("estimate: need n >= 2");
  if (!(fading.m > 0.0)) throw std::domain_error("estimate: m must be > 0");
  if (k_nodes < 1) throw std::invalid_argument("estimate: need k_nodes >= 1");
  if (workers < 1) workers = 1;
  if (workers > n) workers = static_cast<int>(n);

  std::vector<detail::RunningStats> stats(workers);
  std::vector<long long> failures(workers, 0);
  std::vector<std::string> first_failure(workers);
  std::vector<std::exception_ptr> fatal(workers);

  auto chunk = [&](int w) {
    const long long lo = n * w / workers;
    const long long hi = n * (w + 1) / workers;
    auto rng = detail::substream(seed, static_cast<uint64_t>(w));
    std::vector<double> gains;
    for (long long i = lo; i < hi; ++i) {
      detail::draw_gain_vector(fading, k_nodes, rng, gains);
      try {
        stats[w].add(f(gains));
      } catch (const std::exception& e) {
        ++failures[w];
        if (first_failure[w].empty()) first_failure[w] = e.what();
      }
    }
  };

  if (workers == 1) {
    chunk(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          chunk(w);
        } catch (...) {
          fatal[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : fatal)
      if (e) std::rethrow_exception(e);
  }

  detail::RunningStats total;
  long long failed = 0;
  std::string why;
  for (int w = 0; w < workers; ++w) {
    total.merge(stats[w]);
    failed += failures[w];
    if (why.empty()) why = first_failure[w];
  }
  if (failed * 1000 > n)
    throw simulation_error("estimate: " + std::to_string(failed) + "/" +
                           std::to_string(n) +
                           " realizations failed; first: " + why);

  DelayStats out{};
  out.samples = total.n;
  out.mean = total.mean;
  out.std_error =
      total.n > 1 ? std::sqrt(total.m2 / static_cast<double>(total.n - 1) /
                              static_cast<double>(total.n))
                  : 0.0;
  out.method = EstimateMethod::monte_carlo;
  return out;
}

}  // namespace wpc
