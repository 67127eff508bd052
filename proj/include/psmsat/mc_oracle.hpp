#pragma once

// Monte-Carlo realization of the abstract attempt processes behind the
// closed forms. The AP (or STA) is a Bernoulli attempter on the restricted
// slot axis; nothing here knows about 802.11 timing or the analysis code.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "psmsat/backoff_model.hpp"
#include "psmsat/stats.hpp"

namespace psmsat {

struct StaCycleStats {
  Estimate data_slots;    // restart-aware data backoff per STA packet
  Estimate pspoll_slots;  // PS-POLL countdown slots per STA packet
  Estimate ap_successes;  // AP interruptions per STA packet
  Estimate sta_attempts;  // STA data attempts per packet
  std::int64_t n_cycles = 0;
};

struct ApCycleStats {
  Estimate attempts;
  Estimate slots;
  std::int64_t n_cycles = 0;
};

namespace detail {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

inline std::mt19937_64 shard_rng(std::uint64_t seed, unsigned shard) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), shard};
  return std::mt19937_64(seq);
}

/// Runs `body(rng, cycles, stats)` over `shards` disjoint slices and merges in
/// shard order, so the result depends only on (seed, shards).
template <typename Stats, typename Body>
std::vector<Stats> run_sharded(std::int64_t n_cycles, std::uint64_t seed, unsigned shards, Body body) {
  if (shards == 0) shards = 1;
  std::vector<Stats> parts(shards);
  std::vector<std::jthread> workers;
  for (unsigned s = 0; s < shards; ++s) {
    const std::int64_t n = n_cycles / shards + (static_cast<std::int64_t>(s) < n_cycles % shards ? 1 : 0);
    workers.emplace_back([&, s, n] {
      auto rng = shard_rng(seed, s);
      body(rng, n, parts[s]);
    });
  }
  workers.clear();  // join
  return parts;
}

}  // namespace detail

/// Renewal cycles of the STA's data packet with the AP attempting in every
/// slot with probability beta_a.
///
/// At stage k the STA samples x. The first AP attempt slot G is geometric.
/// G < x: AP success at slot G, the STA has counted G data slots and leaves
/// x - G for the PS-POLL, then restarts at stage 0. G == x: collision, move
/// to stage k+1 (discard ends the cycle at K). G > x: STA success.
inline StaCycleStats simulate_sta_cycles(double beta_a, const BackoffSchedule& schedule,
                                         std::int64_t n_cycles, std::uint64_t seed, unsigned shards = 1) {
  if (!(beta_a >= 0.0) || !(beta_a < 1.0)) throw std::invalid_argument("beta_a must lie in [0,1)");
  if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");

  struct Acc {
    RunningStat data, pspoll, ap, attempts;
  };
  const int max_stage = schedule.max_stage();
  auto parts = detail::run_sharded<Acc>(n_cycles, seed, shards, [&](std::mt19937_64& rng, std::int64_t n, Acc& acc) {
    std::geometric_distribution<std::int64_t> first_ap(beta_a > 0.0 ? beta_a : 0.5);
    for (std::int64_t c = 0; c < n; ++c) {
      std::int64_t data = 0, pspoll = 0, ap = 0, attempts = 0;
      int stage = 0;
      for (;;) {
        const std::int64_t x = sample_backoff(schedule, stage, rng);
        const std::int64_t g = beta_a > 0.0 ? first_ap(rng) : detail::kNever;
        if (g < x) {
          data += g;
          pspoll += x - g;
          ++ap;
          stage = 0;
          continue;
        }
        data += x;
        ++attempts;
        if (g == x && stage < max_stage) {
          ++stage;
          continue;
        }
        break;  // success, or discard after a stage-K collision
      }
      acc.data.add(static_cast<double>(data));
      acc.pspoll.add(static_cast<double>(pspoll));
      acc.ap.add(static_cast<double>(ap));
      acc.attempts.add(static_cast<double>(attempts));
    }
  });

  Acc all;
  for (const auto& p : parts) {
    all.data.merge(p.data);
    all.pspoll.merge(p.pspoll);
    all.ap.merge(p.ap);
    all.attempts.merge(p.attempts);
  }
  auto est = [](const RunningStat& r) { return Estimate{r.mean(), r.standard_error()}; };
  return {est(all.data), est(all.pspoll), est(all.ap), est(all.attempts), n_cycles};
}

/// Renewal cycles of the AP's packet with STA collisions at rate beta_s.
inline ApCycleStats simulate_ap_cycles(double beta_s, const BackoffSchedule& schedule, std::int64_t n_cycles,
                                       std::uint64_t seed, unsigned shards = 1) {
  if (!(beta_s >= 0.0) || !(beta_s < 1.0)) throw std::invalid_argument("beta_s must lie in [0,1)");
  if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");

  struct Acc {
    RunningStat attempts, slots;
  };
  const int max_stage = schedule.max_stage();
  auto parts = detail::run_sharded<Acc>(n_cycles, seed, shards, [&](std::mt19937_64& rng, std::int64_t n, Acc& acc) {
    std::bernoulli_distribution collides(beta_s);
    for (std::int64_t c = 0; c < n; ++c) {
      std::int64_t attempts = 0, slots = 0;
      for (int stage = 0;; ++stage) {
        slots += sample_backoff(schedule, stage, rng);
        ++attempts;
        if (stage == max_stage || !collides(rng)) break;
      }
      acc.attempts.add(static_cast<double>(attempts));
      acc.slots.add(static_cast<double>(slots));
    }
  });

  Acc all;
  for (const auto& p : parts) {
    all.attempts.merge(p.attempts);
    all.slots.merge(p.slots);
  }
  return {{all.attempts.mean(), all.attempts.standard_error()}, {all.slots.mean(), all.slots.standard_error()}, n_cycles};
}

}  // namespace psmsat
