#pragma once

// Experiment runner: single-instance solves, parameter sweeps and figure
// datasets as CSV with a '#'-prefixed metadata block. Exit codes: 0 ok,
// 2 config error, 3 solver error, 4 convergence guard (m <= 2).

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wpc/channel.hpp"
#include "wpc/errors.hpp"
#include "wpc/montecarlo.hpp"
#include "wpc/multi_user.hpp"
#include "wpc/quadrature.hpp"
#include "wpc/single_user.hpp"
#include "wpc/version.hpp"

namespace wpc::cli {

struct Options {
  std::string command;
  std::string problem = "p1";
  double bandwidth_hz = 100e3;
  double payload_bits = 50e3;
  std::vector<double> snr_db;  // one entry per node; defaults to {5}
  double m = 4.0;
  std::vector<double> gain;  // fixed gains for `solve`; defaults to {1}
  long long mc_samples = 100000;
  long long calib_samples = 10000;
  unsigned long long seed = 42;
  std::string mode = "exact";
  int workers = 1;
  std::string out;
  // sweep
  std::string var = "r0";
  double from = 1e3;
  double to = 1e5;
  int points = 20;
  bool log_scale = false;
  // figure
  int figure_id = 4;
  double r0_from = 1e3;
  double r0_to = 1e5;
  int r0_points = 20;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

inline void write_metadata(std::ostream& os, const Options& o,
                           const std::vector<std::pair<std::string, std::string>>&
                               extra) {
  os << "# tool: wpc " << kVersion << "\n";
  os << "# command: " << o.command << "\n";
  os << "# problem: " << o.problem << "\n";
  os << "# bandwidth_hz: " << fmt(o.bandwidth_hz) << "\n";
  os << "# payload_bits: " << fmt(o.payload_bits) << "\n";
  os << "# snr_db: " << fmt_list(o.snr_db) << "\n";
  os << "# m: " << fmt(o.m) << "\n";
  os << "# gain: " << fmt_list(o.gain) << "\n";
  os << "# mc_samples: " << o.mc_samples << "\n";
  os << "# calib_samples: " << o.calib_samples << "\n";
  os << "# seed: " << o.seed << "\n";
  os << "# mode: " << o.mode << "\n";
  os << "# workers: " << o.workers << "\n";
  if (o.command == "sweep") {
    os << "# var: " << o.var << "\n";
    os << "# from: " << fmt(o.from) << "\n";
    os << "# to: " << fmt(o.to) << "\n";
    os << "# points: " << o.points << "\n";
    os << "# log_scale: " << (o.log_scale ? 1 : 0) << "\n";
  }
  if (o.command == "figure") {
    os << "# figure: " << o.figure_id << "\n";
    os << "# r0_from: " << fmt(o.r0_from) << "\n";
    os << "# r0_to: " << fmt(o.r0_to) << "\n";
    os << "# r0_points: " << o.r0_points << "\n";
  }
  for (const auto& [k, v] : extra) os << "# " << k << ": " << v << "\n";
}

inline std::vector<double> grid(double from, double to, int points, bool log) {
  if (!(from > 0.0) || !(to >= from))
    throw std::invalid_argument("grid: bounds must be positive and ordered");
  if (points < 1) throw std::invalid_argument("grid: need points >= 1");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = from;
    return g;
  }
  for (int i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / (points - 1);
    g[i] = log ? from * std::pow(to / from, f) : from + f * (to - from);
  }
  return g;
}

struct AvgResult {
  double td = 0.0;
  double err = 0.0;
  double multiplier = 0.0;
};

// Fading-averaged delay of a single-user problem via quadrature, with the
// power multiplier recalibrated per call.
inline AvgResult single_user_average(const std::string& problem,
                                     const SystemParams& sp,
                                     const std::string& mode) {
  AvgResult r;
  if (problem == "p1") {
    const DelayStats s = avg_td_p1(sp);
    r = {s.mean, s.std_error, 0.0};
  } else if (problem == "p2") {
    const MultiplierState ms = calibrate_mu_p2(sp);
    const DelayStats s = avg_td_p2(sp, ms);
    r = {s.mean, s.std_error, ms.mu};
  } else if (problem == "p3") {
    const DelayStats s = avg_td_p3(sp);
    r = {s.mean, s.std_error, 0.0};
  } else if (problem == "p4") {
    const bool exact = mode == "exact";
    const MultiplierState ms =
        exact ? calibrate_mu_p4_exact(sp) : p4_approx_mu(sp);
    const DelayStats s =
        avg_td_p4(sp, ms, exact ? P4Mode::exact : P4Mode::approx);
    r = {s.mean, s.std_error, ms.mu};
  } else {
    throw std::invalid_argument("unknown single-user problem: " + problem);
  }
  return r;
}

inline void emit(const Options& o, const std::string& content,
                 std::ostream& console, bool echo) {
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open output file: " + o.out);
    f << content;
  }
  if (echo || o.out.empty()) console << content;
}

// ---------------------------------------------------------------------------

inline int cmd_solve(const Options& o, std::ostream& console) {
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, std::string>> extra;
  std::ostringstream body;

  if (o.problem == "p5" || o.problem == "p6") {
    MultiUserParams mp;
    mp.bandwidth_hz = o.bandwidth_hz;
    mp.payload_bits = o.payload_bits;
    for (double db : o.snr_db) mp.snr.push_back(snr_from_db(db));
    mp.fading = {o.m};
    const size_t k = mp.snr.size();
    std::vector<ChannelGain> gains(k);
    for (size_t i = 0; i < k; ++i)
      gains[i] = {o.gain[i < o.gain.size() ? i : o.gain.size() - 1]};

    MultiUserAllocation alloc;
    if (o.problem == "p5") {
      alloc = solve_p5(mp, gains);
    } else {
      const SubgradientState st = calibrate_theta(mp, o.calib_samples, o.seed);
      extra.emplace_back("theta", fmt(st.theta));
      extra.emplace_back("theta_iterations", std::to_string(st.iteration));
      extra.emplace_back("theta_residual", fmt(st.residual));
      alloc = solve_p6_inner(mp, gains, st.theta).alloc;
    }
    body << "t1_s";
    for (size_t i = 0; i < k; ++i) body << ",t2_" << (i + 1) << "_s";
    body << ",beta";
    for (size_t i = 0; i < k; ++i) body << ",rate_" << (i + 1) << "_bits";
    body << ",td_s\n";
    body << fmt(alloc.t1);
    for (double t2 : alloc.t2) body << ',' << fmt(t2);
    body << ',' << fmt(alloc.beta);
    for (size_t i = 0; i < k; ++i) {
      const double rate =
          mp.bandwidth_hz * alloc.t2[i] *
          std::log2(1.0 + mp.snr[i] * gains[i].h * gains[i].h * alloc.beta *
                              alloc.t1 / alloc.t2[i]);
      body << ',' << fmt(rate);
    }
    body << ',' << fmt(alloc.delay()) << "\n";
  } else {
    SystemParams sp{o.bandwidth_hz, o.payload_bits, snr_from_db(o.snr_db[0]),
                    {o.m}};
    const ChannelGain g{o.gain[0]};
    Allocation alloc{};
    if (o.problem == "p1") {
      alloc = solve_p1(sp, g);
    } else if (o.problem == "p2") {
      const MultiplierState ms = calibrate_mu_p2(sp);
      extra.emplace_back("mu", fmt(ms.mu));
      alloc = solve_p2(sp, g, ms);
    } else if (o.problem == "p3") {
      alloc = solve_p3(sp, g);
    } else if (o.problem == "p4") {
      const bool exact = o.mode == "exact";
      const MultiplierState ms =
          exact ? calibrate_mu_p4_exact(sp) : p4_approx_mu(sp);
      extra.emplace_back("mu", fmt(ms.mu));
      alloc = solve_p4(sp, g, ms, exact ? P4Mode::exact : P4Mode::approx);
    } else {
      throw std::invalid_argument("unknown problem: " + o.problem);
    }
    body << "t1_s,t2_s,beta,rate_bits,td_s\n";
    body << fmt(alloc.t1) << ',' << fmt(alloc.t2) << ',' << fmt(alloc.beta)
         << ',' << fmt(alloc.rate_bits) << ',' << fmt(alloc.delay()) << "\n";
  }

  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  extra.emplace_back("total_runtime_s", fmt(runtime));
  std::ostringstream full;
  write_metadata(full, o, extra);
  full << body.str();
  emit(o, full.str(), console, true);
  return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& console) {
  const auto t_start = std::chrono::steady_clock::now();
  std::string var = o.var;
  if (var == "snr_db" || var == "snr-db") var = "snr";
  if (var != "r0" && var != "snr" && var != "m")
    throw std::invalid_argument("sweep: --var must be r0, snr or m");
  const std::vector<double> values = grid(o.from, o.to, o.points, o.log_scale);
  const bool multi = o.problem == "p5" || o.problem == "p6";

  std::vector<std::string> row_runtimes;
  std::ostringstream body;
  const std::string var_col =
      var == "r0" ? "r0_bits" : (var == "snr" ? "snr_db" : "m");
  body << var_col << ",td_s,err_s,multiplier\n";

  for (double v : values) {
    const auto t_row = std::chrono::steady_clock::now();
    double r0 = o.payload_bits, m = o.m;
    std::vector<double> snr_db = o.snr_db;
    if (var == "r0") r0 = v;
    if (var == "m") m = v;
    if (var == "snr") snr_db.assign(snr_db.size(), v);

    AvgResult res;
    if (multi) {
      MultiUserParams mp;
      mp.bandwidth_hz = o.bandwidth_hz;
      mp.payload_bits = r0;
      for (double db : snr_db) mp.snr.push_back(snr_from_db(db));
      mp.fading = {m};
      if (o.problem == "p5") {
        const DelayStats s = avg_td_p5(mp, o.mc_samples, o.seed, o.workers);
        res = {s.mean, s.std_error, 0.0};
      } else {
        const SubgradientState st =
            calibrate_theta(mp, o.calib_samples, o.seed);
        const DelayStats s =
            avg_td_p6(mp, st.theta, o.mc_samples, o.seed, o.workers);
        res = {s.mean, s.std_error, st.theta};
      }
    } else {
      SystemParams sp{o.bandwidth_hz, r0, snr_from_db(snr_db[0]), {m}};
      res = single_user_average(o.problem, sp, o.mode);
    }
    body << fmt(v) << ',' << fmt(res.td) << ',' << fmt(res.err) << ','
         << fmt(res.multiplier) << "\n";
    row_runtimes.push_back(fmt(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_row)
            .count()));
  }

  std::vector<std::pair<std::string, std::string>> extra;
  std::string rts;
  for (size_t i = 0; i < row_runtimes.size(); ++i) {
    if (i) rts += ' ';
    rts += row_runtimes[i];
  }
  extra.emplace_back("row_runtimes_s", rts);
  extra.emplace_back(
      "total_runtime_s",
      fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        t_start)
              .count()));
  std::ostringstream full;
  write_metadata(full, o, extra);
  full << body.str();
  emit(o, full.str(), console, false);
  return 0;
}

inline int cmd_figure(const Options& o, std::ostream& console) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<double> r0s =
      grid(o.r0_from, o.r0_to, o.r0_points, /*log=*/true);
  const std::vector<double> snrs_db =
      o.snr_db.size() > 1 || o.figure_id == 4 ? o.snr_db
                                              : std::vector<double>{5, 10, 20};
  std::ostringstream body;

  auto db_tag = [](double db) {
    std::ostringstream os;
    os << db << "db";
    return os.str();
  };

  switch (o.figure_id) {
    case 2: {  // exact vs approximated power multiplier
      body << "r0_bits";
      for (double db : snrs_db)
        body << ",mu_exact_" << db_tag(db) << ",mu_approx_" << db_tag(db);
      body << "\n";
      for (double r0 : r0s) {
        body << fmt(r0);
        for (double db : snrs_db) {
          SystemParams sp{o.bandwidth_hz, r0, snr_from_db(db), {o.m}};
          body << ',' << fmt(calibrate_mu_p4_exact(sp).mu) << ','
               << fmt(p4_approx_mu(sp).mu);
        }
        body << "\n";
      }
      break;
    }
    case 3: {  // P4 average delay: exact, approximated, Monte-Carlo
      body << "r0_bits";
      for (double db : snrs_db)
        body << ",td_exact_" << db_tag(db) << "_s,td_approx_" << db_tag(db)
             << "_s,td_mc_" << db_tag(db) << "_s";
      body << "\n";
      for (double r0 : r0s) {
        body << fmt(r0);
        for (double db : snrs_db) {
          SystemParams sp{o.bandwidth_hz, r0, snr_from_db(db), {o.m}};
          const MultiplierState exact = calibrate_mu_p4_exact(sp);
          const MultiplierState approx = p4_approx_mu(sp);
          const double td_exact = avg_td_p4(sp, exact, P4Mode::exact).mean;
          const double td_approx = avg_td_p4(sp, approx, P4Mode::approx).mean;
          auto f = [&sp, &exact](const std::vector<double>& hs) {
            return solve_p4(sp, ChannelGain{hs[0]}, exact, P4Mode::exact)
                .delay();
          };
          const double td_mc =
              estimate(f, sp.fading, 1, o.mc_samples, o.seed, o.workers).mean;
          body << ',' << fmt(td_exact) << ',' << fmt(td_approx) << ','
               << fmt(td_mc);
        }
        body << "\n";
      }
      break;
    }
    case 4: {  // the four single-user problems at one SNR
      SystemParams base{o.bandwidth_hz, 1.0, snr_from_db(o.snr_db[0]), {o.m}};
      body << "r0_bits,td_p1_s,td_p2_s,td_p3_s,td_p4_s\n";
      for (double r0 : r0s) {
        SystemParams sp = base;
        sp.payload_bits = r0;
        body << fmt(r0) << ',' << fmt(avg_td_p1(sp).mean) << ','
             << fmt(avg_td_p2(sp, calibrate_mu_p2(sp)).mean) << ','
             << fmt(avg_td_p3(sp).mean) << ','
             << fmt(avg_td_p4(sp, calibrate_mu_p4_exact(sp), P4Mode::exact)
                        .mean)
             << "\n";
      }
      break;
    }
    case 5: {  // fading-order comparison at one SNR
      const std::vector<double> ms = {4.0, 10.0};
      body << "r0_bits";
      for (double m : ms)
        body << ",td_p1_m" << m << "_s,td_p2_m" << m << "_s,td_p3_m" << m
             << "_s,td_p4_m" << m << "_s";
      body << "\n";
      for (double r0 : r0s) {
        body << fmt(r0);
        for (double m : ms) {
          SystemParams sp{o.bandwidth_hz, r0, snr_from_db(o.snr_db[0]), {m}};
          body << ',' << fmt(avg_td_p1(sp).mean) << ','
               << fmt(avg_td_p2(sp, calibrate_mu_p2(sp)).mean) << ','
               << fmt(avg_td_p3(sp).mean) << ','
               << fmt(avg_td_p4(sp, calibrate_mu_p4_exact(sp), P4Mode::exact)
                          .mean);
        }
        body << "\n";
      }
      break;
    }
    case 6: {  // two-node P5 vs P6 across SNRs
      body << "r0_bits";
      for (double db : snrs_db)
        body << ",td_p5_" << db_tag(db) << "_s,err_p5_" << db_tag(db)
             << "_s,td_p6_" << db_tag(db) << "_s,err_p6_" << db_tag(db)
             << "_s";
      body << "\n";
      for (double r0 : r0s) {
        body << fmt(r0);
        for (double db : snrs_db) {
          MultiUserParams mp;
          mp.bandwidth_hz = o.bandwidth_hz;
          mp.payload_bits = r0;
          mp.snr = {snr_from_db(db), snr_from_db(db)};
          mp.fading = {o.m};
          const DelayStats p5 =
              avg_td_p5(mp, o.mc_samples, o.seed, o.workers);
          const SubgradientState st =
              calibrate_theta(mp, o.calib_samples, o.seed);
          const DelayStats p6 =
              avg_td_p6(mp, st.theta, o.mc_samples, o.seed, o.workers);
          body << ',' << fmt(p5.mean) << ',' << fmt(p5.std_error) << ','
               << fmt(p6.mean) << ',' << fmt(p6.std_error);
        }
        body << "\n";
      }
      break;
    }
    default:
      throw std::invalid_argument("figure: id must be 2..6");
  }

  std::vector<std::pair<std::string, std::string>> extra;
  extra.emplace_back(
      "total_runtime_s",
      fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        t_start)
              .count()));
  std::ostringstream full;
  write_metadata(full, o, extra);
  full << body.str();
  emit(o, full.str(), console, false);
  return 0;
}

}  // namespace detail

/// Parses arguments and runs one command. Returns the process exit code.
inline int run(std::vector<std::string> args, std::ostream& console = std::cout,
               std::ostream& errs = std::cerr) {
  Options o;
  CLI::App app{"Delay-optimal time/power allocation for harvest-then-transmit "
               "wireless-powered links"};
  app.set_config("--config");
  app.add_option("--problem", o.problem, "p1..p6")->capture_default_str();
  app.add_option("--bandwidth-hz", o.bandwidth_hz)->capture_default_str();
  app.add_option("--payload-bits", o.payload_bits)->capture_default_str();
  app.add_option("--snr-db", o.snr_db,
                 "average SNR in dB; repeat for multiuser nodes");
  app.add_option("--m", o.m, "Nakagami fading order")->capture_default_str();
  app.add_option("--gain", o.gain, "fixed channel power gain(s) for `solve`");
  app.add_option("--mc-samples", o.mc_samples)->capture_default_str();
  app.add_option("--calib-samples", o.calib_samples)->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--mode", o.mode, "P4 solver: exact|approx")
      ->check(CLI::IsMember({"exact", "approx"}))
      ->capture_default_str();
  app.add_option("--workers", o.workers)->capture_default_str();
  app.add_option("--out", o.out, "output CSV path");
  app.add_option("--var", o.var, "sweep variable: r0|snr|m")
      ->capture_default_str();
  app.add_option("--from", o.from)->capture_default_str();
  app.add_option("--to", o.to)->capture_default_str();
  app.add_option("--points", o.points)->capture_default_str();
  app.add_flag("--log", o.log_scale, "log-spaced sweep grid");
  app.add_option("--r0-from", o.r0_from)->capture_default_str();
  app.add_option("--r0-to", o.r0_to)->capture_default_str();
  app.add_option("--r0-points", o.r0_points)->capture_default_str();

  CLI::App* solve = app.add_subcommand("solve", "solve one fixed realization");
  CLI::App* sweep = app.add_subcommand("sweep", "average delay over a grid");
  CLI::App* figure = app.add_subcommand("figure", "reproduce a figure dataset");
  figure->add_option("id", o.figure_id, "figure number (2..6)");
  app.require_subcommand(0, 1);

  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, console, errs);
  } catch (const CLI::ParseError& e) {
    app.exit(e, console, errs);
    return 2;
  }

  if (o.snr_db.empty()) o.snr_db = {5.0};
  if (o.gain.empty()) o.gain = {1.0};
  if (o.workers < 1) o.workers = 1;

  try {
    if (solve->parsed()) {
      o.command = "solve";
      return detail::cmd_solve(o, console);
    }
    if (sweep->parsed()) {
      o.command = "sweep";
      return detail::cmd_sweep(o, console);
    }
    if (figure->parsed()) {
      o.command = "figure";
      return detail::cmd_figure(o, console);
    }
    errs << "error: expected a subcommand (solve, sweep, figure)\n";
    return 2;
  } catch (const convergence_guard_error& e) {
    errs << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    errs << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    errs << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace wpc::cli
