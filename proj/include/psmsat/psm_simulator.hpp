#pragma once

// Slot-level simulation of 802.11 DCF for one saturated AP and one saturated
// power-save STA. The STA never sleeps: every AP data frame carries the More
// bit, so every AP success is followed by a PS-POLL sent on the STA's
// residual data backoff.
//
// The loop jumps over runs of idle slots (min of the two counters) instead
// of stepping slot by slot; all bookkeeping is in integer nanoseconds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "psmsat/backoff_model.hpp"
#include "psmsat/error.hpp"
#include "psmsat/phy_timing.hpp"
#include "psmsat/stats.hpp"

namespace psmsat {

struct Horizon {
  enum class Unit { restricted_slots, nanoseconds };
  Unit unit = Unit::restricted_slots;
  std::int64_t amount = 10'000'000;

  static Horizon slots(std::int64_t n) { return {Unit::restricted_slots, n}; }
  static Horizon time(Nanos t) { return {Unit::nanoseconds, t.count()}; }
};

struct SimConfig {
  PhyParams phy;
  BackoffSchedule schedule = default_schedule();
  std::uint64_t seed = 1;
  Horizon horizon;
  double warmup_fraction = 0.1;
  int batches = 40;
  // Control switch for the restart effect: when false the STA keeps its
  // stage after an AP success and only redraws its counter.
  bool sta_restart_on_ap_success = true;

  void validate() const {
    phy.validate();
    if (horizon.amount < 0) throw ConfigError("sim.horizon must be >= 0");
    if (!(warmup_fraction >= 0.0) || warmup_fraction > 0.5)
      throw ConfigError("sim.warmup_fraction must lie in [0, 0.5]");
    if (batches < 1) throw ConfigError("sim.batches must be >= 1");
  }
};

struct PhaseTimes {
  Nanos idle{};
  Nanos ap_success{};  // AP data + SIFS + ACK + DIFS
  Nanos pspoll{};      // residual countdown + PS-POLL exchange
  Nanos sta_success{};
  Nanos collision{};

  Nanos total() const { return idle + ap_success + pspoll + sta_success + collision; }

  PhaseTimes& operator+=(const PhaseTimes& o) {
    idle += o.idle;
    ap_success += o.ap_success;
    pspoll += o.pspoll;
    sta_success += o.sta_success;
    collision += o.collision;
    return *this;
  }
  friend bool operator==(const PhaseTimes&, const PhaseTimes&) = default;
};

struct CounterBlock {
  std::int64_t restricted_idle_slots = 0;
  std::int64_t ap_attempts = 0;
  std::int64_t sta_data_attempts = 0;
  std::int64_t ap_successes = 0;
  std::int64_t sta_successes = 0;
  std::int64_t collisions = 0;
  std::int64_t ap_discards = 0;
  std::int64_t sta_discards = 0;
  std::int64_t pspoll_count = 0;
  std::int64_t pspoll_countdown_slots = 0;
  Nanos sim_time{};
  PhaseTimes phase;
  std::vector<std::int64_t> sta_attempts_by_stage;

  CounterBlock& operator+=(const CounterBlock& o) {
    restricted_idle_slots += o.restricted_idle_slots;
    ap_attempts += o.ap_attempts;
    sta_data_attempts += o.sta_data_attempts;
    ap_successes += o.ap_successes;
    sta_successes += o.sta_successes;
    collisions += o.collisions;
    ap_discards += o.ap_discards;
    sta_discards += o.sta_discards;
    pspoll_count += o.pspoll_count;
    pspoll_countdown_slots += o.pspoll_countdown_slots;
    sim_time += o.sim_time;
    phase += o.phase;
    if (sta_attempts_by_stage.size() < o.sta_attempts_by_stage.size())
      sta_attempts_by_stage.resize(o.sta_attempts_by_stage.size(), 0);
    for (std::size_t k = 0; k < o.sta_attempts_by_stage.size(); ++k)
      sta_attempts_by_stage[k] += o.sta_attempts_by_stage[k];
    return *this;
  }
  friend bool operator==(const CounterBlock&, const CounterBlock&) = default;
};

/// Post-warmup totals plus the per-batch blocks they were summed from.
struct SimCounters : CounterBlock {
  std::vector<CounterBlock> batches;

  /// Pools replications: totals add, batch lists concatenate.
  SimCounters& operator+=(const SimCounters& o) {
    CounterBlock::operator+=(o);
    batches.insert(batches.end(), o.batches.begin(), o.batches.end());
    return *this;
  }
  friend bool operator==(const SimCounters&, const SimCounters&) = default;
};

namespace detail {

// Splits the run into a warmup block followed by `batches` equal blocks of
// the horizon's progress measure.
class BatchRecorder {
 public:
  BatchRecorder(const SimConfig& cfg, std::size_t stages) : unit_(cfg.horizon.unit), slot_(cfg.phy.slot_time) {
    const std::int64_t total = cfg.horizon.amount;
    const auto warm = static_cast<std::int64_t>(std::floor(static_cast<double>(total) * cfg.warmup_fraction));
    bounds_.push_back(warm);
    const std::int64_t span = total - warm;
    for (int j = 1; j <= cfg.batches; ++j) bounds_.push_back(warm + span * j / cfg.batches);
    blocks_.resize(bounds_.size());
    for (auto& b : blocks_) b.sta_attempts_by_stage.assign(stages, 0);
  }

  bool done() const { return cur_ >= bounds_.size(); }
  CounterBlock& block() { return blocks_[cur_]; }

  std::int64_t progress() const { return unit_ == Horizon::Unit::restricted_slots ? idle_slots_ : now_.count(); }

  /// Idle slots that fit before the current block boundary (at least 1 in
  /// time mode, where a partial slot still starts in this block).
  std::int64_t idle_room() const {
    const std::int64_t left = bounds_[cur_] - progress();
    if (unit_ == Horizon::Unit::restricted_slots) return left;
    return (left + slot_.count() - 1) / slot_.count();
  }

  void add_idle(std::int64_t n) {
    idle_slots_ += n;
    now_ += n * slot_;
    block().restricted_idle_slots += n;
    block().phase.idle += n * slot_;
    block().sim_time += n * slot_;
  }

  void add_time(Nanos PhaseTimes::*phase, Nanos dt) {
    now_ += dt;
    block().phase.*phase += dt;
    block().sim_time += dt;
  }

  void settle() {
    while (!done() && progress() >= bounds_[cur_]) ++cur_;
  }

  Nanos now() const { return now_; }

  SimCounters finish() {
    SimCounters out;
    out.sta_attempts_by_stage.assign(blocks_.front().sta_attempts_by_stage.size(), 0);
    for (std::size_t i = 1; i < blocks_.size(); ++i) {
      out.CounterBlock::operator+=(blocks_[i]);
      out.batches.push_back(blocks_[i]);
    }
    return out;
  }

 private:
  Horizon::Unit unit_;
  Nanos slot_;
  std::vector<std::int64_t> bounds_;
  std::vector<CounterBlock> blocks_;
  std::size_t cur_ = 0;
  std::int64_t idle_slots_ = 0;
  Nanos now_{};
};

}  // namespace detail

/// Runs the AP/STA contention until the horizon. When `trace` is set, one
/// tab-separated record per channel event is written:
///   time_us  kind  ap_stage  sta_stage  slots
/// where kind is IDLE, AP_SUCCESS, PSPOLL, STA_SUCCESS or COLLISION, and
/// slots is the idle-run length or the PS-POLL residual (0 otherwise).
inline SimCounters run_simulation(const SimConfig& cfg, std::ostream* trace = nullptr) {
  cfg.validate();
  const BackoffSchedule& sched = cfg.schedule;
  const int max_stage = sched.max_stage();
  const EventDurations d = frame_durations(cfg.phy);
  const Nanos slot = cfg.phy.slot_time;
  const Nanos ap_exchange = d.t_ap_data + cfg.phy.sifs + d.t_ack + cfg.phy.difs;

  std::mt19937_64 rng(cfg.seed);
  detail::BatchRecorder rec(cfg, sched.stages());

  // The AP starts with a frame in its queue, as if a PS-POLL was just served.
  int ap_stage = 0, sta_stage = 0;
  std::int64_t ap = sample_backoff(sched, 0, rng);
  std::int64_t sta = sample_backoff(sched, 0, rng);

  auto emit = [&](const char* kind, std::int64_t slots) {
    if (!trace) return;
    // Exact microseconds with three decimals, straight from the ns clock.
    const auto ns = rec.now().count();
    char frac[4] = {char('0' + ns / 100 % 10), char('0' + ns / 10 % 10), char('0' + ns % 10), '\0'};
    *trace << ns / 1000 << '.' << frac << '\t' << kind << '\t' << ap_stage << '\t' << sta_stage << '\t' << slots << '\n';
  };
  auto next_stage = [&](int& stage, std::int64_t& discards) {
    if (stage == max_stage) {
      ++discards;
      stage = 0;
    } else {
      ++stage;
    }
  };

  rec.settle();
  while (!rec.done()) {
    std::int64_t run = std::min(ap, sta);
    while (run > 0 && !rec.done()) {
      const std::int64_t step = std::min(run, rec.idle_room());
      if (step > 0) {
        emit("IDLE", step);
        rec.add_idle(step);
        ap -= step;
        sta -= step;
        run -= step;
      }
      rec.settle();
    }
    if (rec.done()) break;

    CounterBlock& b = rec.block();
    if (ap == 0 && sta == 0) {
      emit("COLLISION", 0);
      ++b.collisions;
      ++b.ap_attempts;
      ++b.sta_data_attempts;
      ++b.sta_attempts_by_stage[static_cast<std::size_t>(sta_stage)];
      rec.add_time(&PhaseTimes::collision, d.t_c);
      next_stage(ap_stage, b.ap_discards);
      next_stage(sta_stage, b.sta_discards);
      ap = sample_backoff(sched, ap_stage, rng);
      sta = sample_backoff(sched, sta_stage, rng);
    } else if (ap == 0) {
      emit("AP_SUCCESS", 0);
      ++b.ap_attempts;
      ++b.ap_successes;
      rec.add_time(&PhaseTimes::ap_success, ap_exchange);
      // sta >= 1 here: a zero STA counter would have been a collision.
      emit("PSPOLL", sta);
      b.pspoll_countdown_slots += sta;
      ++b.pspoll_count;
      rec.add_time(&PhaseTimes::pspoll, sta * slot + d.t_s_pspl);
      ap_stage = 0;
      ap = sample_backoff(sched, 0, rng);
      if (cfg.sta_restart_on_ap_success) sta_stage = 0;
      sta = sample_backoff(sched, sta_stage, rng);
    } else {
      emit("STA_SUCCESS", 0);
      ++b.sta_data_attempts;
      ++b.sta_successes;
      ++b.sta_attempts_by_stage[static_cast<std::size_t>(sta_stage)];
      rec.add_time(&PhaseTimes::sta_success, d.t_s_sta);
      sta_stage = 0;
      sta = sample_backoff(sched, 0, rng);
    }
    rec.settle();
  }
  return rec.finish();
}

struct EmpiricalEstimates {
  double beta_a = 0.0;
  double beta_s = 0.0;
  double beta_ps = 0.0;
  double p_coll = 0.0;
  double theta_ap_pkts = 0.0;
  double theta_sta_pkts = 0.0;
  double theta_ap_mbps = 0.0;
  double theta_sta_mbps = 0.0;
  double mean_pspoll_service_us = 0.0;  // residual countdown + PS-POLL exchange

  // 95% batch-means halfwidths; empty when there are too few batches.
  struct Halfwidths {
    double beta_a, beta_s, beta_ps, p_coll, theta_ap_pkts, theta_sta_pkts;
  };
  std::optional<Halfwidths> ci;
  std::size_t batches_used = 0;
  std::string ci_note;
};

inline constexpr std::size_t kMinBatches = 20;

namespace detail {

inline double ratio(std::int64_t num, std::int64_t den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

inline double per_second(std::int64_t n, Nanos t) {
  return t.count() > 0 ? static_cast<double>(n) * 1e9 / static_cast<double>(t.count()) : 0.0;
}

inline std::int64_t channel_events(const CounterBlock& b) {
  return b.restricted_idle_slots + b.ap_successes + b.sta_successes + b.collisions;
}

template <typename F>
double batch_halfwidth(const std::vector<CounterBlock>& batches, F metric) {
  RunningStat s;
  for (const auto& b : batches) s.add(metric(b));
  const double n = static_cast<double>(s.count());
  boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  return t * std::sqrt(s.variance() / n);
}

}  // namespace detail

/// Renewal-ratio estimates from post-warmup counters.
inline EmpiricalEstimates derive_estimates(const SimCounters& c, const PhyParams& phy) {
  using detail::ratio;
  EmpiricalEstimates e;
  e.beta_a = ratio(c.ap_attempts, c.restricted_idle_slots);
  e.beta_s = ratio(c.sta_data_attempts, c.restricted_idle_slots);
  e.beta_ps = ratio(c.pspoll_count, c.pspoll_countdown_slots);
  e.p_coll = ratio(c.collisions, detail::channel_events(c));
  e.theta_ap_pkts = detail::per_second(c.ap_successes, c.sim_time);
  e.theta_sta_pkts = detail::per_second(c.sta_successes, c.sim_time);
  e.theta_ap_mbps = e.theta_ap_pkts * static_cast<double>(phy.ap_payload_bytes) * 8.0 / 1e6;
  e.theta_sta_mbps = e.theta_sta_pkts * static_cast<double>(phy.sta_payload_bytes) * 8.0 / 1e6;
  e.mean_pspoll_service_us = c.pspoll_count > 0 ? to_us(c.phase.pspoll) / static_cast<double>(c.pspoll_count) : 0.0;

  if (c.ap_attempts + c.sta_data_attempts == 0) {
    e.ci_note = "no attempts";
    return e;
  }
  std::vector<CounterBlock> usable;
  for (const auto& b : c.batches)
    if (b.restricted_idle_slots > 0 && b.pspoll_countdown_slots > 0 && b.sim_time.count() > 0) usable.push_back(b);
  e.batches_used = usable.size();
  if (usable.size() < kMinBatches) {
    e.ci_note = "insufficient data: " + std::to_string(usable.size()) + " usable batches, need " +
                std::to_string(kMinBatches);
    return e;
  }
  auto hw = [&](auto metric) { return detail::batch_halfwidth(usable, metric); };
  e.ci = EmpiricalEstimates::Halfwidths{
      hw([](const CounterBlock& b) { return ratio(b.ap_attempts, b.restricted_idle_slots); }),
      hw([](const CounterBlock& b) { return ratio(b.sta_data_attempts, b.restricted_idle_slots); }),
      hw([](const CounterBlock& b) { return ratio(b.pspoll_count, b.pspoll_countdown_slots); }),
      hw([](const CounterBlock& b) { return ratio(b.collisions, detail::channel_events(b)); }),
      hw([](const CounterBlock& b) { return detail::per_second(b.ap_successes, b.sim_time); }),
      hw([](const CounterBlock& b) { return detail::per_second(b.sta_successes, b.sim_time); }),
  };
  return e;
}

inline EmpiricalEstimates derive_estimates(const SimCounters& c, const SimConfig& cfg) {
  return derive_estimates(c, cfg.phy);
}

/// Runs `replications` independent seeds (seed, seed+1, ...) and pools them.
inline SimCounters run_replications(SimConfig cfg, int replications) {
  SimCounters pooled;
  for (int r = 0; r < replications; ++r) {
    SimConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(r);
    pooled += run_simulation(c);
  }
  return pooled;
}

}  // namespace psmsat
