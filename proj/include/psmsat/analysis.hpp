#pragma once

// Closed-form attempt rates and saturation throughput for one saturated AP
// and one saturated power-save STA.
//
// Time is measured on the restricted backoff axis: the idle slots left
// after all transmissions, interframe spaces and PS-POLL countdowns are cut
// out. On that axis the AP attempts at rate beta_a and the STA at beta_s.
// Every AP success makes the STA spend its residual data backoff on a
// contention-free PS-POLL and then restart from stage 0; that restart is
// what pushes beta_s below beta_a.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "psmsat/backoff_model.hpp"
#include "psmsat/error.hpp"
#include "psmsat/phy_timing.hpp"

namespace psmsat {

/// Which stage-collision coefficient to use. `paper_verbatim` raises
/// (1 - beta_a) to b_k - 1, which breaks X_k + Y_k + P(success) = 1;
/// `consistent` uses exponent b_k.
enum class YkVariant { consistent, paper_verbatim };

inline const char* to_string(YkVariant v) {
  return v == YkVariant::consistent ? "consistent" : "paper_verbatim";
}

inline YkVariant parse_yk_variant(const std::string& s) {
  if (s == "consistent") return YkVariant::consistent;
  if (s == "paper_verbatim") return YkVariant::paper_verbatim;
  throw ConfigError("analysis.yk_variant: expected consistent or paper_verbatim, got '" + s + "'");
}

/// Per-stage coefficients of the restart-aware backoff recursions.
///   x[k]  probability the AP interrupts the stage-k backoff (restart)
///   y[k]  probability the stage-k attempt collides (advance to k+1)
///   z[k]  expected data-backoff slots counted in stage k
///   z1[k] expected PS-POLL countdown slots produced in stage k
///   z2[k] expected AP successes (PS-POLLs) in stage k
struct StageCoefficients {
  std::vector<double> x, y, z, z1, z2;
  double beta_a_used = 0.0;
};

namespace detail {

inline void require_probability_below_one(double p, const char* name) {
  if (!(p >= 0.0) || !(p < 1.0))
    throw std::invalid_argument(std::string(name) + " must lie in [0,1), got " + std::to_string(p));
}

// 1 - (1-beta)^n without cancellation for small beta.
inline double one_minus_pow_q(double beta, double n) { return -std::expm1(n * std::log1p(-beta)); }

}  // namespace detail

inline StageCoefficients stage_coefficients(double beta_a, const BackoffSchedule& schedule,
                                            YkVariant variant = YkVariant::consistent) {
  detail::require_probability_below_one(beta_a, "beta_a");
  StageCoefficients c;
  c.beta_a_used = beta_a;
  const std::size_t n = schedule.stages();
  c.x.resize(n);
  c.y.resize(n);
  c.z.resize(n);
  c.z1.resize(n);
  c.z2.resize(n);

  const double q = 1.0 - beta_a;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t b = schedule.windows()[k];
    const double bd = static_cast<double>(b);
    if (beta_a == 0.0) {
      c.x[k] = 0.0;
      c.y[k] = 0.0;
      c.z[k] = (bd - 1.0) / 2.0;
      c.z1[k] = 0.0;
      c.z2[k] = 0.0;
      continue;
    }
    c.x[k] = 1.0 - detail::one_minus_pow_q(beta_a, bd) / (bd * beta_a);
    const double y_exponent = variant == YkVariant::consistent ? bd : bd - 1.0;
    c.y[k] = detail::one_minus_pow_q(beta_a, y_exponent) / bd;

    // Outer sum over the sampled backoff x; the inner sums over the
    // interrupt slot i < x are carried forward rather than recomputed.
    double inner_i = 0.0;  // sum_{i<x} q^i beta i
    double inner_1 = 0.0;  // sum_{i<x} q^i beta
    double qx = 1.0;
    double z = 0.0, z1 = 0.0, z2 = 0.0;
    for (std::int64_t xi = 0; xi < b; ++xi) {
      const double x = static_cast<double>(xi);
      z += inner_i + qx * beta_a * x + qx * q * x;
      z1 += x * inner_1 - inner_i;  // sum_{i<x} q^i beta (x - i)
      z2 += inner_1;
      inner_i += qx * beta_a * x;
      inner_1 += qx * beta_a;
      qx *= q;
    }
    c.z[k] = z / bd;
    c.z1[k] = z1 / bd;
    c.z2[k] = z2 / bd;
  }
  return c;
}

/// Solution of a restart recursion r_k = X_k r_0 + Y_k r_{k+1} + W_k
/// (no continuation past stage K): r_0 = sum W_k prod Y_l / (1 - sum X_k prod Y_l).
inline double restart_ratio(const StageCoefficients& c, std::span<const double> reward) {
  double num = 0.0;
  double restart_mass = 0.0;
  double reach = 1.0;  // probability of reaching stage k without restart
  for (std::size_t k = 0; k < c.x.size(); ++k) {
    num += reward[k] * reach;
    restart_mass += c.x[k] * reach;
    reach *= c.y[k];
  }
  const double den = 1.0 - restart_mass;
  if (!(den > 0.0)) throw ModelBreakdown("restart recursion diverges (denominator " + std::to_string(den) + ")");
  return num / den;
}

/// The three restart-aware means for one beta_a.
struct RestartMeans {
  double data_slots = 0.0;    // E[X_s,1]
  double pspoll_slots = 0.0;  // E[X_ps,1]
  double ap_successes = 0.0;  // E[A_ps,1]
};

inline RestartMeans restart_means(double beta_a, const BackoffSchedule& schedule,
                                  YkVariant variant = YkVariant::consistent) {
  const StageCoefficients c = stage_coefficients(beta_a, schedule, variant);
  return {restart_ratio(c, c.z), restart_ratio(c, c.z1), restart_ratio(c, c.z2)};
}

inline double restart_mean_backoff(double beta_a, const BackoffSchedule& s,
                                   YkVariant v = YkVariant::consistent) {
  const StageCoefficients c = stage_coefficients(beta_a, s, v);
  return restart_ratio(c, c.z);
}

inline double pspoll_mean_backoff(double beta_a, const BackoffSchedule& s,
                                  YkVariant v = YkVariant::consistent) {
  const StageCoefficients c = stage_coefficients(beta_a, s, v);
  return restart_ratio(c, c.z1);
}

inline double pspoll_mean_count(double beta_a, const BackoffSchedule& s,
                                YkVariant v = YkVariant::consistent) {
  const StageCoefficients c = stage_coefficients(beta_a, s, v);
  return restart_ratio(c, c.z2);
}

namespace detail {
// 1 + p + ... + p^K
inline double truncated_geometric(double p, int max_stage) {
  double sum = 0.0, term = 1.0;
  for (int k = 0; k <= max_stage; ++k) {
    sum += term;
    term *= p;
  }
  return sum;
}

inline std::string format_tol(double tol) {
  std::ostringstream os;
  os << tol;
  return os.str();
}

inline double checked_rate(double rate, const char* what) {
  if (!(rate > 0.0) || !(rate <= 1.0) || !std::isfinite(rate))
    throw ModelBreakdown(std::string(what) + " = " + std::to_string(rate) + " is not a probability");
  return rate;
}
}  // namespace detail

/// AP attempt rate when the STA attempts at beta_s: expected attempts over
/// expected decremented slots between AP successes.
inline double ap_rate_given_sta(double beta_s, const BackoffSchedule& s) {
  detail::require_probability_below_one(beta_s, "beta_s");
  double den = 0.0, pow_s = 1.0;
  for (int k = 0; k <= s.max_stage(); ++k) {
    den += mean_backoff(s, k) * pow_s;
    pow_s *= beta_s;
  }
  if (!(den > 0.0)) throw ModelBreakdown("AP mean backoff is zero");
  return detail::checked_rate(detail::truncated_geometric(beta_s, s.max_stage()) / den, "beta_a");
}

/// STA data attempt rate when the AP attempts at beta_a.
inline double sta_rate_given_ap(double beta_a, const BackoffSchedule& s,
                                YkVariant v = YkVariant::consistent) {
  const double slots = restart_mean_backoff(beta_a, s, v);
  if (!(slots > 0.0)) throw ModelBreakdown("STA restart mean backoff is zero");
  return detail::checked_rate(detail::truncated_geometric(beta_a, s.max_stage()) / slots, "beta_s");
}

/// PS-POLL attempt rate per countdown slot. Empty when the AP never
/// succeeds (beta_a = 0) or no residual is ever left over.
inline std::optional<double> pspoll_rate(double beta_a, const BackoffSchedule& s,
                                         YkVariant v = YkVariant::consistent) {
  const StageCoefficients c = stage_coefficients(beta_a, s, v);
  const double slots = restart_ratio(c, c.z1);
  const double count = restart_ratio(c, c.z2);
  if (!(slots > 0.0) || !(count > 0.0)) return std::nullopt;
  return detail::checked_rate(count / slots, "beta_ps");
}

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 10'000;
  double damping = 0.5;
  YkVariant variant = YkVariant::consistent;
};

enum class SolveMethod { damped_iteration, bisection };

struct AttemptRates {
  double beta_a = 0.0;
  double beta_s = 0.0;
  std::optional<double> beta_ps;
  int iterations = 0;
  double residual = 0.0;
  SolveMethod method = SolveMethod::damped_iteration;
};

/// Solves beta_s = g(f(beta_s)) with f = ap_rate_given_sta and
/// g = sta_rate_given_ap. Damped functional iteration first; if that stalls,
/// bisection on h(b) = b - g(f(b)) over (0,1).
inline AttemptRates solve_fixed_point(const BackoffSchedule& s, const SolverOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ConfigError("solver.tol must be > 0");
  if (opt.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
  if (!(opt.damping > 0.0) || opt.damping > 1.0) throw ConfigError("solver.damping must lie in (0,1]");

  auto map = [&](double beta_s) { return sta_rate_given_ap(ap_rate_given_sta(beta_s, s), s, opt.variant); };
  auto finish = [&](double beta_s, double residual, int iters, SolveMethod m) {
    AttemptRates r;
    r.beta_s = beta_s;
    r.beta_a = ap_rate_given_sta(beta_s, s);
    r.beta_ps = pspoll_rate(r.beta_a, s, opt.variant);
    r.iterations = iters;
    r.residual = residual;
    r.method = m;
    return r;
  };

  double beta_s = 2.0 / static_cast<double>(s.window(0) + 1);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  constexpr int kStallLimit = 200;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double target = map(beta_s);
    const double h = beta_s - target;
    if (std::abs(h) < opt.tol) return finish(beta_s, std::abs(h), it, SolveMethod::damped_iteration);
    if (std::abs(h) < best) {
      best = std::abs(h);
      since_best = 0;
    } else if (++since_best > kStallLimit) {
      break;
    }
    beta_s = (1.0 - opt.damping) * beta_s + opt.damping * target;
    if (!(beta_s > 0.0) || !(beta_s < 1.0)) break;
  }

  // Bracketed fallback. h < 0 near 0 because g > 0 there.
  double lo = 1e-12, hi = 1.0 - 1e-12;
  double h_lo = lo - map(lo);
  double h_hi = hi - map(hi);
  if (!(h_lo < 0.0 && h_hi > 0.0))
    throw ConvergenceError("damped iteration stalled after " + std::to_string(it) +
                           " steps and h does not change sign on (0,1)");
  for (int b = 0; b < 400; ++b, ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double precision
    const double h = mid - map(mid);
    if (std::abs(h) < opt.tol) return finish(mid, std::abs(h), it + 1, SolveMethod::bisection);
    if (h < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  throw ConvergenceError("tolerance " + detail::format_tol(opt.tol) + " not reached after " +
                         std::to_string(it) + " iterations");
}

struct EventProbabilities {
  double p_s_ap = 0.0;
  double p_s_sta = 0.0;
  double p_c = 0.0;
  double p_idle = 0.0;
};

inline EventProbabilities event_probabilities(double beta_a, double beta_s) {
  return {beta_a * (1.0 - beta_s), beta_s * (1.0 - beta_a), beta_a * beta_s,
          (1.0 - beta_a) * (1.0 - beta_s)};
}

inline EventProbabilities event_probabilities(const AttemptRates& r) {
  return event_probabilities(r.beta_a, r.beta_s);
}

struct ThroughputReport {
  double theta_ap_pkts = 0.0;  // packets/s
  double theta_sta_pkts = 0.0;
  double theta_ap_mbps = 0.0;  // payload bits only
  double theta_sta_mbps = 0.0;
  EventProbabilities probs;
  double expected_cycle_time_us = 0.0;
};

/// Renewal-reward throughputs. `d` must already carry the PS-POLL service
/// time (see complete_with_pspoll).
inline ThroughputReport saturation_throughput(const AttemptRates& r, const EventDurations& d,
                                              const PhyParams& p) {
  if (!r.beta_ps) throw ModelBreakdown("PS-POLL attempt rate undefined (AP never succeeds)");
  if (!d.t_s_ap_us) throw std::logic_error("saturation_throughput: durations lack the PS-POLL service time");
  ThroughputReport t;
  t.probs = event_probabilities(r);
  t.expected_cycle_time_us = t.probs.p_s_ap * *d.t_s_ap_us + t.probs.p_s_sta * to_us(d.t_s_sta) +
                             t.probs.p_idle * to_us(p.slot_time) + t.probs.p_c * to_us(d.t_c);
  t.theta_ap_pkts = t.probs.p_s_ap / t.expected_cycle_time_us * 1e6;
  t.theta_sta_pkts = t.probs.p_s_sta / t.expected_cycle_time_us * 1e6;
  t.theta_ap_mbps = t.theta_ap_pkts * static_cast<double>(p.ap_payload_bytes) * 8.0 / 1e6;
  t.theta_sta_mbps = t.theta_sta_pkts * static_cast<double>(p.sta_payload_bytes) * 8.0 / 1e6;
  return t;
}

/// Everything the analytic side produces for one configuration.
struct AnalysisResult {
  AttemptRates rates;
  EventDurations durations;
  ThroughputReport throughput;
};

inline AnalysisResult analyze(const BackoffSchedule& s, const PhyParams& p, const SolverOptions& opt = {}) {
  AnalysisResult out;
  out.rates = solve_fixed_point(s, opt);
  if (!out.rates.beta_ps) throw ModelBreakdown("PS-POLL attempt rate undefined");
  out.durations = complete_with_pspoll(frame_durations(p), p, *out.rates.beta_ps);
  out.throughput = saturation_throughput(out.rates, out.durations, p);
  return out;
}

}  // namespace psmsat
