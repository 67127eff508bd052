#pragma once

// Run configuration: flat `section.key = value` text, `#` starts a comment,
// lists are written `[a, b, c]`. Missing keys take the 802.11b defaults;
// unknown or repeated keys are errors.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psmsat/analysis.hpp"
#include "psmsat/backoff_model.hpp"
#include "psmsat/error.hpp"
#include "psmsat/phy_timing.hpp"
#include "psmsat/psm_simulator.hpp"

namespace psmsat {

struct MacConfig {
  int k = 7;
  std::int64_t cwmin = 32;
  std::int64_t cwcap = 1024;
  std::optional<std::vector<std::int64_t>> windows;  // wins over cwmin/cwcap

  BackoffSchedule schedule() const {
    if (windows) return BackoffSchedule(*windows);
    return BackoffSchedule::doubling(cwmin, k, cwcap);
  }
  BackoffSchedule schedule_for_cwmin(std::int64_t cw) const { return BackoffSchedule::doubling(cw, k, cwcap); }
};

struct SimSection {
  std::uint64_t seed = 1;
  std::int64_t horizon_slots = 10'000'000;
  double horizon_us = 0.0;  // > 0 switches the horizon to simulated time
  double warmup_fraction = 0.1;
  int replications = 1;
  int batches = 40;
};

struct SweepSection {
  std::vector<std::int64_t> cwmin_values{8, 16, 32, 64, 128, 256, 512, 1024};
  bool default_grid = true;
};

struct ValidateSection {
  std::int64_t cycles = 1'000'000;
};

struct RunConfig {
  PhyParams phy;
  MacConfig mac;
  SolverOptions solver;
  SimSection sim;
  SweepSection sweep;
  ValidateSection validate;

  SimConfig sim_config(const BackoffSchedule& schedule, std::uint64_t seed) const {
    SimConfig c;
    c.phy = phy;
    c.schedule = schedule;
    c.seed = seed;
    c.horizon = sim.horizon_us > 0.0 ? Horizon::time(from_us(sim.horizon_us)) : Horizon::slots(sim.horizon_slots);
    c.warmup_fraction = sim.warmup_fraction;
    c.batches = sim.batches;
    return c;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']')
    throw ConfigError(key + ": expected a list like [a, b, c], got '" + text + "'");
  std::vector<T> out;
  std::stringstream items(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(key + ": empty list element");
    out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": list must not be empty");
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  c.phy.validate();
  if (c.mac.windows && c.mac.windows->size() != static_cast<std::size_t>(c.mac.k) + 1)
    throw ConfigError("mac.windows: " + std::to_string(c.mac.windows->size()) + " entries but mac.k = " +
                      std::to_string(c.mac.k) + " requires " + std::to_string(c.mac.k + 1));
  (void)c.mac.schedule();
  if (!(c.solver.tol > 0.0)) throw ConfigError("solver.tol must be > 0");
  if (c.solver.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
  if (!(c.solver.damping > 0.0) || c.solver.damping > 1.0) throw ConfigError("solver.damping must lie in (0,1]");
  if (c.sim.horizon_slots < 0) throw ConfigError("sim.horizon_slots must be >= 0");
  if (c.sim.horizon_us < 0.0) throw ConfigError("sim.horizon_us must be >= 0");
  if (!(c.sim.warmup_fraction >= 0.0) || c.sim.warmup_fraction > 0.5)
    throw ConfigError("sim.warmup_fraction must lie in [0, 0.5]");
  if (c.sim.replications < 0) throw ConfigError("sim.replications must be >= 0");
  if (c.sim.batches < 1) throw ConfigError("sim.batches must be >= 1");
  for (auto cw : c.sweep.cwmin_values) {
    if (cw < 1) throw ConfigError("sweep.cwmin_values: entries must be >= 1");
    if (cw > c.mac.cwcap) throw ConfigError("sweep.cwmin_values: entry " + std::to_string(cw) + " exceeds mac.cwcap");
  }
  if (c.validate.cycles < 1) throw ConfigError("validate.cycles must be >= 1");
}

/// Parses a configuration stream; `origin` prefixes error messages.
inline RunConfig load_config(std::istream& in, const std::string& origin = "<config>") {
  RunConfig c;
  bool k_given = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](auto& field) {
    return Setter([&field](const std::string& key, const std::string& v) {
      field = detail::parse_number<std::remove_reference_t<decltype(field)>>(key, v);
    });
  };
  auto us = [](Nanos& field) {
    return Setter([&field](const std::string& key, const std::string& v) {
      field = from_us(detail::parse_number<double>(key, v));
    });
  };
  auto variant = Setter([&c](const std::string&, const std::string& v) { c.solver.variant = parse_yk_variant(v); });

  const std::map<std::string, Setter> setters{
      {"phy.data_rate_mbps", num(c.phy.data_rate)},
      {"phy.control_rate_mbps", num(c.phy.control_rate)},
      {"phy.plcp_time_us", us(c.phy.plcp_time)},
      {"phy.phy_header_time_us", us(c.phy.phy_header_time)},
      {"phy.mac_header_bytes", num(c.phy.mac_header_bytes)},
      {"phy.pspoll_bytes", num(c.phy.pspoll_bytes)},
      {"phy.ack_bytes", num(c.phy.ack_bytes)},
      {"phy.ap_payload_bytes", num(c.phy.ap_payload_bytes)},
      {"phy.sta_payload_bytes", num(c.phy.sta_payload_bytes)},
      {"phy.slot_time_us", us(c.phy.slot_time)},
      {"phy.sifs_us", us(c.phy.sifs)},
      {"phy.difs_us", us(c.phy.difs)},
      {"phy.eifs_us", us(c.phy.eifs)},
      {"mac.k", [&](const std::string& key, const std::string& v) {
         c.mac.k = detail::parse_number<int>(key, v);
         k_given = true;
       }},
      {"mac.cwmin", num(c.mac.cwmin)},
      {"mac.cwcap", num(c.mac.cwcap)},
      {"mac.windows", [&](const std::string& key, const std::string& v) {
         c.mac.windows = detail::parse_list<std::int64_t>(key, v);
       }},
      {"solver.tol", num(c.solver.tol)},
      {"solver.max_iter", num(c.solver.max_iter)},
      {"solver.damping", num(c.solver.damping)},
      {"analysis.yk_variant", variant},
      {"solver.yk_variant", variant},
      {"sim.seed", num(c.sim.seed)},
      {"sim.horizon_slots", num(c.sim.horizon_slots)},
      {"sim.horizon_us", num(c.sim.horizon_us)},
      {"sim.warmup_fraction", num(c.sim.warmup_fraction)},
      {"sim.replications", num(c.sim.replications)},
      {"sim.batches", num(c.sim.batches)},
      {"sweep.cwmin_values", [&](const std::string& key, const std::string& v) {
         c.sweep.cwmin_values = detail::parse_list<std::int64_t>(key, v);
         c.sweep.default_grid = false;
       }},
      {"validate.cycles", num(c.validate.cycles)},
  };

  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + body + "'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (auto [pos, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(pos->second));
    if (value.empty()) throw ConfigError(where + key + ": missing value");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (c.mac.windows && !k_given) c.mac.k = static_cast<int>(c.mac.windows->size()) - 1;
  validate(c);
  return c;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return load_config(in, path);
}

/// The full effective configuration as ordered key/value pairs, suitable for
/// echoing into output headers and for reloading.
inline std::vector<std::pair<std::string, std::string>> effective_config(const RunConfig& c) {
  using detail::format_double;
  std::vector<std::pair<std::string, std::string>> kv{
      {"phy.data_rate_mbps", format_double(c.phy.data_rate)},
      {"phy.control_rate_mbps", format_double(c.phy.control_rate)},
      {"phy.plcp_time_us", format_double(to_us(c.phy.plcp_time))},
      {"phy.phy_header_time_us", format_double(to_us(c.phy.phy_header_time))},
      {"phy.mac_header_bytes", std::to_string(c.phy.mac_header_bytes)},
      {"phy.pspoll_bytes", std::to_string(c.phy.pspoll_bytes)},
      {"phy.ack_bytes", std::to_string(c.phy.ack_bytes)},
      {"phy.ap_payload_bytes", std::to_string(c.phy.ap_payload_bytes)},
      {"phy.sta_payload_bytes", std::to_string(c.phy.sta_payload_bytes)},
      {"phy.slot_time_us", format_double(to_us(c.phy.slot_time))},
      {"phy.sifs_us", format_double(to_us(c.phy.sifs))},
      {"phy.difs_us", format_double(to_us(c.phy.difs))},
      {"phy.eifs_us", format_double(to_us(c.phy.eifs))},
      {"mac.k", std::to_string(c.mac.k)},
      {"mac.cwmin", std::to_string(c.mac.cwmin)},
      {"mac.cwcap", std::to_string(c.mac.cwcap)},
  };
  if (c.mac.windows) kv.emplace_back("mac.windows", detail::format_list(*c.mac.windows));
  kv.insert(kv.end(), {
                          {"solver.tol", format_double(c.solver.tol)},
                          {"solver.max_iter", std::to_string(c.solver.max_iter)},
                          {"solver.damping", format_double(c.solver.damping)},
                          {"analysis.yk_variant", to_string(c.solver.variant)},
                          {"sim.seed", std::to_string(c.sim.seed)},
                          {"sim.horizon_slots", std::to_string(c.sim.horizon_slots)},
                          {"sim.horizon_us", format_double(c.sim.horizon_us)},
                          {"sim.warmup_fraction", format_double(c.sim.warmup_fraction)},
                          {"sim.replications", std::to_string(c.sim.replications)},
                          {"sim.batches", std::to_string(c.sim.batches)},
                          {"sweep.cwmin_values", detail::format_list(c.sweep.cwmin_values)},
                          {"validate.cycles", std::to_string(c.validate.cycles)},
                      });
  return kv;
}

}  // namespace psmsat
