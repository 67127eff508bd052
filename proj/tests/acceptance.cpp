// Acceptance suite. One PASS/FAIL line per criterion, indented detail lines
// underneath. Exit status is non-zero if any criterion fails.
//
// usage: acceptance <path-to-psmsat-cli>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psmsat/harness.hpp"

using namespace psmsat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::vector<std::string> details;

  void check(bool cond, const std::string& what) {
    if (!cond) ok = false;
    details.push_back(std::string(cond ? "ok   " : "MISS ") + what);
  }
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

double rel_err(double sim, double ana) { return std::abs(sim - ana) / std::abs(ana); }

template <typename F>
Outcome guarded(F body) {
  try {
    return body();
  } catch (const std::exception& e) {
    Outcome o;
    o.check(false, std::string("exception: ") + e.what());
    return o;
  }
}

void report(int id, const std::string& title, const Outcome& o, int& failures) {
  std::cout << (o.ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << "\n";
  for (const auto& d : o.details) std::cout << "        " << d << "\n";
  std::cout.flush();
  if (!o.ok) ++failures;
}

// Default PHY/MAC parameters, consistent Y_k, 1.2e7 slots with 10% warmup: 1.08e7
// post-warmup restricted slots per point.
RunConfig agreement_config() {
  RunConfig cfg;
  cfg.sim.horizon_slots = 12'000'000;
  cfg.sim.seed = 2024;
  cfg.sim.replications = 1;
  cfg.sweep.cwmin_values = {16, 32, 64, 128, 256};
  cfg.sweep.default_grid = false;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome criterion_agreement(const std::vector<SweepRow>& rows, double seconds) {
  Outcome o;
  for (const auto& r : rows) {
    if (!r.analytic || !r.simulated) {
      o.check(false, "cw " + std::to_string(r.cwmin) + ": missing result (" + r.status + ")");
      continue;
    }
    const auto& a = *r.analytic;
    const auto& s = *r.simulated;
    const std::string cw = "cw " + std::to_string(r.cwmin) + " ";
    auto cmp = [&](const char* name, double sim, double ana, double tol) {
      const double e = rel_err(sim, ana);
      o.check(e <= tol, cw + name + ": sim " + fmt(sim) + " ana " + fmt(ana) + " rel " + fmt(e, 3) +
                            " (tol " + fmt(tol) + ")");
    };
    cmp("beta_a", s.beta_a, a.rates.beta_a, 0.05);
    cmp("beta_s", s.beta_s, a.rates.beta_s, 0.05);
    cmp("beta_ps", s.beta_ps, *a.rates.beta_ps, 0.05);
    cmp("thr_ap", s.theta_ap_pkts, a.throughput.theta_ap_pkts, 0.05);
    cmp("thr_sta", s.theta_sta_pkts, a.throughput.theta_sta_pkts, 0.05);
    cmp("p_coll", s.p_coll, a.throughput.probs.p_c, 0.10);
  }
  o.check(seconds < 120.0, "runtime " + fmt(seconds, 3) + " s (limit 120 s)");
  return o;
}

Outcome criterion_orderings(const std::vector<SweepRow>& rows) {
  Outcome o;
  for (const auto& r : rows) {
    const std::string cw = "cw " + std::to_string(r.cwmin) + " ";
    if (!r.analytic || !r.simulated) {
      o.check(false, cw + "missing result (" + r.status + ")");
      continue;
    }
    const auto& a = *r.analytic;
    const auto& s = *r.simulated;
    o.check(*a.rates.beta_ps > a.rates.beta_a && a.rates.beta_a > a.rates.beta_s &&
                a.throughput.theta_ap_pkts > a.throughput.theta_sta_pkts,
            cw + "analytic: beta_ps " + fmt(*a.rates.beta_ps) + " > beta_a " + fmt(a.rates.beta_a) + " > beta_s " +
                fmt(a.rates.beta_s) + ", thr_ap > thr_sta");
    o.check(s.beta_ps > s.beta_a && s.beta_a > s.beta_s && s.theta_ap_pkts > s.theta_sta_pkts,
            cw + "simulated: beta_ps " + fmt(s.beta_ps) + " > beta_a " + fmt(s.beta_a) + " > beta_s " +
                fmt(s.beta_s) + ", thr_ap " + fmt(s.theta_ap_pkts) + " > thr_sta " + fmt(s.theta_sta_pkts));
  }
  return o;
}

Outcome criterion_oracle() {
  Outcome o;
  const std::vector<double> betas{0.01, 0.05, 0.1, 0.3};
  const std::vector<std::vector<std::int64_t>> schedules{{2}, {4, 8}, {8, 16, 32}, {16, 32, 64, 64}};
  constexpr std::int64_t cycles = 1'000'000;
  double worst = 0.0;
  std::string worst_case;
  std::uint64_t salt = 0;
  for (double beta : betas) {
    for (const auto& w : schedules) {
      const BackoffSchedule s(w);
      const auto m = restart_means(beta, s);
      const auto mc = simulate_sta_cycles(beta, s, cycles, derive_seed(77, salt++));
      const std::string name = "beta_a " + fmt(beta) + " " + schedule_name(s);
      auto cmp = [&](const char* q, const Estimate& e, double closed) {
        const double z = e.standard_error > 0 ? (e.mean - closed) / e.standard_error : (e.mean == closed ? 0 : 1e9);
        if (std::abs(z) > worst) {
          worst = std::abs(z);
          worst_case = name + " " + q;
        }
        if (std::abs(z) > 3.0)
          o.check(false, name + " " + q + ": closed " + fmt(closed) + " oracle " + fmt(e.mean) + " z " + fmt(z, 3));
      };
      cmp("b_data", mc.data_slots, m.data_slots);
      cmp("b_ps", mc.pspoll_slots, m.pspoll_slots);
      cmp("a_ps", mc.ap_successes, m.ap_successes);
    }
  }
  o.check(worst <= 3.0, std::to_string(betas.size() * schedules.size() * 3) + " comparisons at 1e6 cycles, max |z| " +
                            fmt(worst, 3) + " (" + worst_case + ")");
  const auto hand = restart_means(0.5, BackoffSchedule({2}));
  const double third = 1.0 / 3.0;
  const double herr = std::max({std::abs(hand.data_slots - third), std::abs(hand.pspoll_slots - third),
                                std::abs(hand.ap_successes - third)});
  o.check(herr < 1e-15, "hand case b0=2 beta_a=0.5 -> (1/3, 1/3, 1/3), max error " + fmt(herr, 3));
  return o;
}

Outcome criterion_conservation() {
  Outcome o;
  const double err = conservation_error(YkVariant::consistent, 10'000, 4242);
  o.check(err < 1e-12, "stage identity over 1e4 random draws, max error " + fmt(err, 3));
  for (std::int64_t b0 : {2, 16, 32, 256, 1024}) {
    const auto s = BackoffSchedule::doubling(b0, 7, std::max<std::int64_t>(b0, 1024));
    const auto m = restart_means(1e-12, s);
    const double target = (static_cast<double>(b0) - 1.0) / 2.0;
    const double e = std::max({std::abs(m.data_slots - target), std::abs(m.pspoll_slots), std::abs(m.ap_successes)});
    o.check(e < 1e-6, "b0 " + std::to_string(b0) + " at beta_a 1e-12: (" + fmt(m.data_slots, 10) + ", " +
                          fmt(m.pspoll_slots, 3) + ", " + fmt(m.ap_successes, 3) + "), max error " + fmt(e, 3));
  }
  return o;
}

Outcome criterion_fixed_point() {
  Outcome o;
  for (std::int64_t cw : {8, 16, 32, 64, 128, 256, 512, 1024}) {
    const auto s = BackoffSchedule::doubling(cw, 7, 1024);
    const auto r = solve_fixed_point(s);
    // Re-substitute into both ratio definitions.
    const double ra = std::abs(r.beta_a - ap_rate_given_sta(r.beta_s, s));
    const double rs = std::abs(r.beta_s - sta_rate_given_ap(r.beta_a, s));
    o.check(ra < 1e-9 && rs < 1e-9, "cw " + std::to_string(cw) + ": residuals " + fmt(ra, 3) + ", " + fmt(rs, 3));
  }
  for (std::int64_t b0 : {8, 16, 32, 64, 1024}) {
    const auto r = solve_fixed_point(BackoffSchedule({b0}));
    const double expect = 2.0 / static_cast<double>(b0 - 1);
    o.check(r.beta_a == expect, "K=0 b0 " + std::to_string(b0) + ": beta_a " + fmt(r.beta_a, 17) + " vs 2/(b0-1) " +
                                    fmt(expect, 17));
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

Outcome criterion_determinism(const std::string& cli) {
  Outcome o;
  if (cli.empty()) {
    o.check(false, "no CLI path given");
    return o;
  }
  const fs::path base = fs::temp_directory_path() / "psmsat_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg = base / "run.cfg";
  std::ofstream(cfg) << "sweep.cwmin_values = [16, 64]\nsim.horizon_slots = 500000\nvalidate.cycles = 50000\n";

  const std::vector<std::string> commands{"analyze", "simulate --trace", "sweep", "validate"};
  for (const auto& cmd : commands) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int rep = 0; rep < 2; ++rep) {
      // Same path both times, so file listings echoed to stdout match too.
      const fs::path out = base / cmd.substr(0, cmd.find(' '));
      fs::remove_all(out);
      fs::create_directories(out);
      const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + cfg.string() + "\" --seed 31 --out \"" +
                               out.string() + "\" > \"" + (out / "stdout.txt").string() + "\" 2>&1";
      const int rc = std::system(line.c_str());
      if (rc != 0) o.check(false, cmd + ": exit status " + std::to_string(rc));
      runs.push_back(snapshot(out));
    }
    std::size_t bytes = 0;
    for (const auto& [name, body] : runs[0]) bytes += body.size();
    o.check(runs[0] == runs[1] && runs[0].size() > 1, cmd + ": " + std::to_string(runs[0].size()) +
                                                          " files (" + std::to_string(bytes) + " bytes) identical");
  }
  fs::remove_all(base);
  return o;
}

Outcome criterion_ratio(const std::vector<SweepRow>& rows) {
  Outcome o;
  for (const auto& r : rows) {
    if (!r.analytic || !r.simulated) {
      o.check(false, "cw " + std::to_string(r.cwmin) + ": missing result");
      continue;
    }
    const auto& a = *r.analytic;
    const double ba = a.rates.beta_a, bs = a.rates.beta_s;
    const double identity = ba * (1 - bs) / (bs * (1 - ba));
    const double ana = a.throughput.theta_ap_pkts / a.throughput.theta_sta_pkts;
    const double sim = r.simulated->theta_ap_pkts / r.simulated->theta_sta_pkts;
    const double id_err = rel_err(ana, identity);
    const double sim_err = rel_err(sim, ana);
    o.check(id_err < 1e-9, "cw " + std::to_string(r.cwmin) + " analytic ratio " + fmt(ana, 10) + " identity " +
                               fmt(identity, 10) + " rel " + fmt(id_err, 3));
    o.check(sim_err <= 0.07, "cw " + std::to_string(r.cwmin) + " simulated ratio " + fmt(sim) + " vs " + fmt(ana) +
                                 " rel " + fmt(sim_err, 3) + " (tol 0.07)");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  int failures = 0;

  const RunConfig cfg = agreement_config();
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_sweep(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunConfig grid = agreement_config();
  grid.sweep = SweepSection{};  // full default CWmin grid
  const auto grid_rows = run_sweep(grid);

  report(1, "analysis/simulation agreement (5% rates and throughput, 10% p_coll, >= 1e7 slots, < 2 min)",
         guarded([&] { return criterion_agreement(rows, seconds); }), failures);
  report(2, "orderings beta_ps > beta_a > beta_s and thr_ap > thr_sta, analytic and simulated",
         guarded([&] { return criterion_orderings(grid_rows); }), failures);
  report(3, "closed forms vs Monte-Carlo oracle within 3 SE at 1e6 cycles, plus exact hand case", guarded(criterion_oracle), failures);
  report(4, "conservation within 1e-12 and zero-rate limits within 1e-6", guarded(criterion_conservation), failures);
  report(5, "fixed-point residuals < 1e-9 and K=0 decoupled closed form", guarded(criterion_fixed_point), failures);
  report(6, "byte-identical outputs for repeated commands", guarded([&] { return criterion_determinism(cli); }), failures);
  report(7, "throughput ratio identity (1e-9 analytic, 7% simulated)", guarded([&] { return criterion_ratio(rows); }), failures);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
