#pragma once

// Drivers behind the command-line tool: parameter sweeps, oracle
// validation, and the text/CSV/plot-data writers. Every output starts with
// a `#` header block carrying the tool version, the full effective config
// and the seeds, which is enough to regenerate the file byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "psmsat/analysis.hpp"
#include "psmsat/config.hpp"
#include "psmsat/mc_oracle.hpp"
#include "psmsat/psm_simulator.hpp"

namespace psmsat {

inline constexpr const char* kToolVersion = "psmsat 1.0.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitBreakdown = 2, kExitValidation = 3 };

/// splitmix64 step; derives independent per-point seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::string output_header(const std::string& command, const RunConfig& cfg) {
  std::ostringstream h;
  h << "# " << kToolVersion << "\n# command: " << command << "\n# config:\n";
  for (const auto& [k, v] : effective_config(cfg)) h << "#   " << k << " = " << v << "\n";
  h << "# seed: " << cfg.sim.seed << "\n";
  if (cfg.sweep.default_grid) h << "# note: sweep.cwmin_values is the tool's default grid\n";
  return h.str();
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  std::int64_t cwmin = 0;
  std::optional<AnalysisResult> analytic;
  std::optional<EmpiricalEstimates> simulated;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

/// Fixed column order of sweep.csv.
inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "cwmin",          "beta_a_ana",      "beta_s_ana",       "beta_ps_ana",      "pcoll_ana",
      "thr_ap_pkts_ana", "thr_sta_pkts_ana", "thr_ap_mbps_ana",  "thr_sta_mbps_ana", "beta_a_sim",
      "beta_a_ci",      "beta_s_sim",      "beta_s_ci",        "beta_ps_sim",      "beta_ps_ci",
      "pcoll_sim",      "pcoll_ci",        "thr_ap_pkts_sim",  "thr_sta_pkts_sim", "seed",
      "status"};
  return cols;
}

inline SweepRow sweep_point(const RunConfig& cfg, std::int64_t cwmin) {
  SweepRow row;
  row.cwmin = cwmin;
  row.seed = derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(cwmin));
  const BackoffSchedule schedule = cfg.mac.schedule_for_cwmin(cwmin);
  try {
    row.analytic = analyze(schedule, cfg.phy, cfg.solver);
  } catch (const ModelBreakdown& e) {
    row.status = e.what();
  } catch (const ConvergenceError& e) {
    row.status = e.what();
  }
  if (cfg.sim.replications > 0) {
    const SimCounters pooled = run_replications(cfg.sim_config(schedule, row.seed), cfg.sim.replications);
    row.simulated = derive_estimates(pooled, cfg.phy);
  }
  return row;
}

/// One row per cwmin, computed concurrently, returned in input order.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
  std::vector<std::future<SweepRow>> jobs;
  for (auto cw : cfg.sweep.cwmin_values)
    jobs.push_back(std::async(std::launch::async, [&cfg, cw] { return sweep_point(cfg, cw); }));
  std::vector<SweepRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

namespace detail {
inline std::string csv_num(std::optional<double> v) { return v ? format_double(*v) : std::string(); }
inline std::string csv_text(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n') ch = ';';
  return s;
}
}  // namespace detail

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, const std::string& header) {
  using detail::csv_num;
  out << header;
  const auto& cols = sweep_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : rows) {
    std::vector<std::string> f{std::to_string(r.cwmin)};
    if (const auto& a = r.analytic) {
      f.insert(f.end(), {csv_num(a->rates.beta_a), csv_num(a->rates.beta_s), csv_num(a->rates.beta_ps),
                         csv_num(a->throughput.probs.p_c), csv_num(a->throughput.theta_ap_pkts),
                         csv_num(a->throughput.theta_sta_pkts), csv_num(a->throughput.theta_ap_mbps),
                         csv_num(a->throughput.theta_sta_mbps)});
    } else {
      f.resize(f.size() + 8);
    }
    if (const auto& s = r.simulated) {
      auto ci = [&](double EmpiricalEstimates::Halfwidths::*m) {
        return s->ci ? csv_num((*s->ci).*m) : std::string();
      };
      using H = EmpiricalEstimates::Halfwidths;
      f.insert(f.end(), {csv_num(s->beta_a), ci(&H::beta_a), csv_num(s->beta_s), ci(&H::beta_s),
                         csv_num(s->beta_ps), ci(&H::beta_ps), csv_num(s->p_coll), ci(&H::p_coll),
                         csv_num(s->theta_ap_pkts), csv_num(s->theta_sta_pkts)});
    } else {
      f.resize(f.size() + 10);
    }
    f.push_back(std::to_string(r.seed));
    f.push_back(detail::csv_text(r.status));
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << "\n";
  }
}

/// Diagnostics that have no CSV column: solver iterations and residuals.
inline void write_sweep_diagnostics(std::ostream& out, const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) {
    out << "# cwmin " << r.cwmin << ": ";
    if (r.analytic)
      out << "iterations=" << r.analytic->rates.iterations
          << " residual=" << detail::format_double(r.analytic->rates.residual) << " method="
          << (r.analytic->rates.method == SolveMethod::damped_iteration ? "damped" : "bisection");
    else
      out << "analysis unavailable";
    if (r.simulated && !r.simulated->ci_note.empty()) out << " sim_ci=" << r.simulated->ci_note;
    out << "\n";
  }
}

struct PlotSeries {
  std::string file;
  std::string description;
  std::function<std::optional<double>(const AnalysisResult&)> analytic;
  std::function<std::optional<double>(const EmpiricalEstimates&)> simulated;
  std::function<std::optional<double>(const EmpiricalEstimates&)> halfwidth;
};

inline std::vector<PlotSeries> plot_series() {
  using H = EmpiricalEstimates::Halfwidths;
  auto hw = [](double H::*m) {
    return [m](const EmpiricalEstimates& e) -> std::optional<double> {
      if (!e.ci) return std::nullopt;
      return (*e.ci).*m;
    };
  };
  return {
      {"beta_a.dat", "AP data attempt probability per restricted slot",
       [](const AnalysisResult& a) -> std::optional<double> { return a.rates.beta_a; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.beta_a; }, hw(&H::beta_a)},
      {"beta_s.dat", "STA data attempt probability per restricted slot",
       [](const AnalysisResult& a) -> std::optional<double> { return a.rates.beta_s; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.beta_s; }, hw(&H::beta_s)},
      {"beta_ps.dat", "STA PS-POLL attempt probability per countdown slot",
       [](const AnalysisResult& a) { return a.rates.beta_ps; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.beta_ps; }, hw(&H::beta_ps)},
      {"pcoll.dat", "collision probability",
       [](const AnalysisResult& a) -> std::optional<double> { return a.throughput.probs.p_c; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.p_coll; }, hw(&H::p_coll)},
      {"throughput_ap.dat", "AP saturation throughput (packets/s)",
       [](const AnalysisResult& a) -> std::optional<double> { return a.throughput.theta_ap_pkts; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.theta_ap_pkts; },
       hw(&H::theta_ap_pkts)},
      {"throughput_sta.dat", "STA saturation throughput (packets/s)",
       [](const AnalysisResult& a) -> std::optional<double> { return a.throughput.theta_sta_pkts; },
       [](const EmpiricalEstimates& e) -> std::optional<double> { return e.theta_sta_pkts; },
       hw(&H::theta_sta_pkts)},
  };
}

/// Whitespace-separated `cwmin analytic simulated halfwidth`; `nan` marks
/// a missing value.
inline void write_plot_data(std::ostream& out, const PlotSeries& s, const std::vector<SweepRow>& rows,
                            const std::string& header) {
  auto cell = [](std::optional<double> v) { return v ? detail::format_double(*v) : std::string("nan"); };
  out << header << "# " << s.description << "\n# cwmin analytic simulated halfwidth95\n";
  for (const auto& r : rows) {
    out << r.cwmin << ' ' << cell(r.analytic ? s.analytic(*r.analytic) : std::nullopt) << ' '
        << cell(r.simulated ? s.simulated(*r.simulated) : std::nullopt) << ' '
        << cell(r.simulated ? s.halfwidth(*r.simulated) : std::nullopt) << "\n";
  }
}

/// Writes sweep.csv and one plot-data file per series into `dir`.
inline std::vector<std::filesystem::path> write_sweep_outputs(const std::filesystem::path& dir,
                                                              const std::vector<SweepRow>& rows,
                                                              const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  const std::string header = output_header("sweep", cfg);
  std::vector<std::filesystem::path> written;
  {
    const auto p = dir / "sweep.csv";
    std::ofstream out(p, std::ios::binary);
    std::ostringstream diag;
    write_sweep_diagnostics(diag, rows);
    write_sweep_csv(out, rows, header + diag.str());
    written.push_back(p);
  }
  for (const auto& s : plot_series()) {
    const auto p = dir / s.file;
    std::ofstream out(p, std::ios::binary);
    write_plot_data(out, s, rows, header);
    written.push_back(p);
  }
  return written;
}

// ---------------------------------------------------------------------------
// validate

struct ValidationLine {
  std::string case_name;
  std::string quantity;
  double closed_form = 0.0;
  double oracle = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
  bool gated = true;  // false for reported-only approximations
};

struct ValidationReport {
  std::vector<ValidationLine> lines;
  double conservation_max_error = 0.0;
  bool conservation_ok = true;
  double hand_case_error = 0.0;
  bool hand_case_ok = true;
  double max_abs_z = 0.0;

  bool passed(double z_limit = 5.0) const { return conservation_ok && hand_case_ok && max_abs_z <= z_limit; }
};

inline constexpr double kConservationTol = 1e-12;

/// Largest |X_k + Y_k + P(STA success at k) - 1| over random (beta_a, b_k).
inline double conservation_error(YkVariant variant, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> beta(1e-6, 0.999);
  std::uniform_int_distribution<std::int64_t> window(1, 1024);
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double b = beta(rng);
    const std::int64_t w = window(rng);
    const auto c = stage_coefficients(b, BackoffSchedule({w}), variant);
    double success = 0.0, qx1 = 1.0 - b;
    for (std::int64_t x = 0; x < w; ++x, qx1 *= 1.0 - b) success += qx1;
    success /= static_cast<double>(w);
    worst = std::max(worst, std::abs(c.x[0] + c.y[0] + success - 1.0));
  }
  return worst;
}

struct ValidationGrid {
  std::vector<double> beta_a{0.01, 0.05, 0.1, 0.3};
  std::vector<double> beta_s{0.1, 0.3};
  std::vector<std::vector<std::int64_t>> schedules{{2}, {4, 8}, {8, 16, 32}, {16, 32, 64, 64}};
};

inline std::string schedule_name(const BackoffSchedule& s) { return detail::format_list(s.windows()); }

inline ValidationReport run_validation(const RunConfig& cfg, const ValidationGrid& grid = {}) {
  const YkVariant variant = cfg.solver.variant;
  const std::int64_t cycles = cfg.validate.cycles;
  ValidationReport rep;
  std::uint64_t salt = 0;

  auto add = [&](std::string name, std::string qty, double closed, const Estimate& est, bool gated) {
    ValidationLine l{std::move(name), std::move(qty), closed, est.mean, est.standard_error, 0.0, gated};
    if (est.standard_error > 0.0)
      l.z = (est.mean - closed) / est.standard_error;
    else
      l.z = est.mean == closed ? 0.0 : std::copysign(INFINITY, est.mean - closed);
    if (gated) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(l.z));
    rep.lines.push_back(std::move(l));
  };

  auto sta_case = [&](double beta_a, const BackoffSchedule& s) {
    const std::string name = "sta beta_a=" + detail::format_double(beta_a) + " b=" + schedule_name(s);
    const StaCycleStats o = simulate_sta_cycles(beta_a, s, cycles, derive_seed(cfg.sim.seed, salt++));
    std::optional<RestartMeans> m;
    try {
      m = restart_means(beta_a, s, variant);
    } catch (const ModelBreakdown&) {
    }
    if (!m) {
      add(name, "restart recursion", NAN, o.data_slots, true);
      return;
    }
    add(name, "data_slots", m->data_slots, o.data_slots, true);
    add(name, "pspoll_slots", m->pspoll_slots, o.pspoll_slots, true);
    add(name, "ap_successes", m->ap_successes, o.ap_successes, true);
    add(name, "sta_attempts~", detail::truncated_geometric(beta_a, s.max_stage()), o.sta_attempts, false);
  };

  // Hand-checked case: K = 0, b_0 = 2, beta_a = 0.5 gives 1/3 for all three.
  {
    const BackoffSchedule s({2});
    const RestartMeans m = restart_means(0.5, s, variant);
    rep.hand_case_error = std::max({std::abs(m.data_slots - 1.0 / 3.0), std::abs(m.pspoll_slots - 1.0 / 3.0),
                                    std::abs(m.ap_successes - 1.0 / 3.0)});
    rep.hand_case_ok = rep.hand_case_error < 1e-12;
    sta_case(0.5, s);
  }
  for (const auto& w : grid.schedules)
    for (double b : grid.beta_a) sta_case(b, BackoffSchedule(w));

  for (const auto& w : grid.schedules) {
    const BackoffSchedule s(w);
    for (double bs : grid.beta_s) {
      const std::string name = "ap beta_s=" + detail::format_double(bs) + " b=" + schedule_name(s);
      const ApCycleStats o = simulate_ap_cycles(bs, s, cycles, derive_seed(cfg.sim.seed, salt++));
      double slots = 0.0, p = 1.0;
      for (int k = 0; k <= s.max_stage(); ++k, p *= bs) slots += mean_backoff(s, k) * p;
      add(name, "attempts", detail::truncated_geometric(bs, s.max_stage()), o.attempts, true);
      add(name, "slots", slots, o.slots, true);
    }
  }

  rep.conservation_max_error = conservation_error(variant, 10'000, derive_seed(cfg.sim.seed, 0xc0ffee));
  rep.conservation_ok = rep.conservation_max_error < kConservationTol;
  return rep;
}

inline void write_validation_report(std::ostream& out, const ValidationReport& rep, const RunConfig& cfg) {
  out << output_header("validate", cfg);
  out << "# columns: case | quantity | closed_form | oracle | std_error | z   (~ = approximation, not gated)\n";
  for (const auto& l : rep.lines) {
    out << l.case_name << " | " << l.quantity << " | " << detail::format_double(l.closed_form) << " | "
        << detail::format_double(l.oracle) << " | " << detail::format_double(l.standard_error) << " | "
        << detail::format_double(l.z) << "\n";
  }
  out << "conservation: max |X+Y+P_success-1| = " << detail::format_double(rep.conservation_max_error)
      << (rep.conservation_ok ? " PASS" : " FAIL") << "\n";
  out << "hand case K=0 b0=2 beta_a=0.5: max error vs 1/3 = " << detail::format_double(rep.hand_case_error)
      << (rep.hand_case_ok ? " PASS" : " FAIL") << "\n";
  out << "max |z| = " << detail::format_double(rep.max_abs_z) << "\n";
  out << "result: " << (rep.passed() ? "PASS" : "FAIL") << "\n";
}

// ---------------------------------------------------------------------------
// analyze / simulate

inline void write_analysis_report(std::ostream& out, const AnalysisResult& a, const BackoffSchedule& s,
                                  const RunConfig& cfg) {
  using detail::format_double;
  out << output_header("analyze", cfg);
  out << "windows = " << schedule_name(s) << "\n";
  out << "beta_a = " << format_double(a.rates.beta_a) << "\n";
  out << "beta_s = " << format_double(a.rates.beta_s) << "\n";
  out << "beta_ps = " << (a.rates.beta_ps ? format_double(*a.rates.beta_ps) : "undefined") << "\n";
  out << "iterations = " << a.rates.iterations << "\n";
  out << "residual = " << format_double(a.rates.residual) << "\n";
  out << "p_s_ap = " << format_double(a.throughput.probs.p_s_ap) << "\n";
  out << "p_s_sta = " << format_double(a.throughput.probs.p_s_sta) << "\n";
  out << "p_c = " << format_double(a.throughput.probs.p_c) << "\n";
  out << "p_idle = " << format_double(a.throughput.probs.p_idle) << "\n";
  out << "e_t_pspoll_us = " << format_double(*a.durations.e_t_pspl_us) << "\n";
  out << "t_s_ap_us = " << format_double(*a.durations.t_s_ap_us) << "\n";
  out << "t_s_sta_us = " << format_double(to_us(a.durations.t_s_sta)) << "\n";
  out << "t_c_us = " << format_double(to_us(a.durations.t_c)) << "\n";
  out << "expected_cycle_time_us = " << format_double(a.throughput.expected_cycle_time_us) << "\n";
  out << "theta_ap_pkts = " << format_double(a.throughput.theta_ap_pkts) << "\n";
  out << "theta_sta_pkts = " << format_double(a.throughput.theta_sta_pkts) << "\n";
  out << "theta_ap_mbps = " << format_double(a.throughput.theta_ap_mbps) << "\n";
  out << "theta_sta_mbps = " << format_double(a.throughput.theta_sta_mbps) << "\n";
}

inline void write_simulation_report(std::ostream& out, const SimCounters& c, const EmpiricalEstimates& e,
                                    const RunConfig& cfg) {
  using detail::format_double;
  out << output_header("simulate", cfg);
  out << "restricted_idle_slots = " << c.restricted_idle_slots << "\n";
  out << "ap_attempts = " << c.ap_attempts << "\n";
  out << "sta_data_attempts = " << c.sta_data_attempts << "\n";
  out << "ap_successes = " << c.ap_successes << "\n";
  out << "sta_successes = " << c.sta_successes << "\n";
  out << "collisions = " << c.collisions << "\n";
  out << "ap_discards = " << c.ap_discards << "\n";
  out << "sta_discards = " << c.sta_discards << "\n";
  out << "pspoll_count = " << c.pspoll_count << "\n";
  out << "pspoll_countdown_slots = " << c.pspoll_countdown_slots << "\n";
  out << "sim_time_us = " << format_double(to_us(c.sim_time)) << "\n";
  out << "batches = " << c.batches.size() << "\n";
  auto line = [&](const char* name, double v, std::optional<double> hw) {
    out << name << " = " << format_double(v);
    if (hw) out << " +- " << format_double(*hw);
    out << "\n";
  };
  using H = EmpiricalEstimates::Halfwidths;
  auto hw = [&](double H::*m) -> std::optional<double> {
    if (!e.ci) return std::nullopt;
    return (*e.ci).*m;
  };
  line("beta_a_hat", e.beta_a, hw(&H::beta_a));
  line("beta_s_hat", e.beta_s, hw(&H::beta_s));
  line("beta_ps_hat", e.beta_ps, hw(&H::beta_ps));
  line("p_coll_hat", e.p_coll, hw(&H::p_coll));
  line("theta_ap_pkts_hat", e.theta_ap_pkts, hw(&H::theta_ap_pkts));
  line("theta_sta_pkts_hat", e.theta_sta_pkts, hw(&H::theta_sta_pkts));
  line("theta_ap_mbps_hat", e.theta_ap_mbps, std::nullopt);
  line("theta_sta_mbps_hat", e.theta_sta_mbps, std::nullopt);
  line("mean_pspoll_service_us", e.mean_pspoll_service_us, std::nullopt);
  if (!e.ci_note.empty()) out << "ci_note = " << e.ci_note << "\n";
}

}  // namespace psmsat
