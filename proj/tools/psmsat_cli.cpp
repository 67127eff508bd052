// psmsat: analysis, simulation, sweeps and oracle validation for a saturated
// AP and one power-save STA.
//
// Exit codes: 0 success, 1 usage/config error, 2 model breakdown,
// 3 validation failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "psmsat/psmsat.hpp"

namespace fs = std::filesystem;
using namespace psmsat;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  bool trace = false;
};

RunConfig effective(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config_file(f.config);
  if (f.seed) cfg.sim.seed = *f.seed;
  if (f.replications) cfg.sim.replications = *f.replications;
  validate(cfg);
  return cfg;
}

// Prints to stdout and, with --out, also writes <out>/<name>.
void emit(const Flags& f, const std::string& name, const std::string& text) {
  std::cout << text;
  if (f.out.empty()) return;
  fs::create_directories(f.out);
  std::ofstream(fs::path(f.out) / name, std::ios::binary) << text;
}

int cmd_analyze(const Flags& f) {
  const RunConfig cfg = effective(f);
  const BackoffSchedule s = cfg.mac.schedule();
  const AnalysisResult a = analyze(s, cfg.phy, cfg.solver);
  std::ostringstream os;
  write_analysis_report(os, a, s, cfg);
  emit(f, "analyze.txt", os.str());
  return kExitOk;
}

int cmd_simulate(const Flags& f) {
  const RunConfig cfg = effective(f);
  const BackoffSchedule s = cfg.mac.schedule();
  const int reps = std::max(1, cfg.sim.replications);
  SimCounters pooled;
  for (int r = 0; r < reps; ++r) {
    SimConfig sc = cfg.sim_config(s, cfg.sim.seed + static_cast<std::uint64_t>(r));
    if (f.trace && r == 0) {
      const fs::path dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
      fs::create_directories(dir);
      std::ofstream trace(dir / "trace.tsv", std::ios::binary);
      trace << "# time_us\tkind\tap_stage\tsta_stage\tslots\n";
      pooled += run_simulation(sc, &trace);
    } else {
      pooled += run_simulation(sc);
    }
  }
  std::ostringstream os;
  write_simulation_report(os, pooled, derive_estimates(pooled, cfg.phy), cfg);
  emit(f, "simulate.txt", os.str());
  return kExitOk;
}

int cmd_sweep(const Flags& f) {
  const RunConfig cfg = effective(f);
  const auto rows = run_sweep(cfg);
  const fs::path dir = f.out.empty() ? fs::path("out") : fs::path(f.out);
  for (const auto& p : write_sweep_outputs(dir, rows, cfg)) std::cout << "wrote " << p.string() << "\n";
  for (const auto& r : rows)
    if (r.status != "ok") std::cerr << "cwmin " << r.cwmin << ": " << r.status << "\n";
  return kExitOk;
}

int cmd_validate(const Flags& f) {
  const RunConfig cfg = effective(f);
  const ValidationReport rep = run_validation(cfg);
  std::ostringstream os;
  write_validation_report(os, rep, cfg);
  emit(f, "validate.txt", os.str());
  return rep.passed() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saturation attempt rates and throughput of an 802.11 AP and a power-save STA"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--seed", flags.seed, "Master seed (overrides sim.seed)");
  app.add_option("--replications", flags.replications, "Simulation replications (overrides sim.replications)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--trace", flags.trace, "simulate: write a per-event trace to <out>/trace.tsv");

  int rc = kExitOk;
  app.add_subcommand("analyze", "Solve the attempt-rate fixed point and throughputs")
      ->callback([&] { rc = cmd_analyze(flags); });
  app.add_subcommand("simulate", "Run the slot-level protocol simulator")->callback([&] { rc = cmd_simulate(flags); });
  app.add_subcommand("sweep", "Analysis (and simulation) over a CWmin grid; writes CSV and plot data")
      ->callback([&] { rc = cmd_sweep(flags); });
  app.add_subcommand("validate", "Compare closed forms against the Monte-Carlo oracle")
      ->callback([&] { rc = cmd_validate(flags); });
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelBreakdown& e) {
    std::cerr << e.what() << "\n";
    return kExitBreakdown;
  } catch (const ConvergenceError& e) {
    std::cerr << e.what() << "\n";
    return kExitBreakdown;
  }
  return rc;
}
