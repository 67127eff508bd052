#pragma once

// Frame and channel-event durations for 802.11b basic access.
//
// Event durations are integer nanoseconds so the simulator can accumulate
// them without drift. Quantities that are expectations (the mean PS-POLL
// service time and the AP success time that contains it) are real-valued
// microseconds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "psmsat/error.hpp"

namespace psmsat {

using Nanos = std::chrono::nanoseconds;

inline double to_us(Nanos t) { return static_cast<double>(t.count()) / 1000.0; }
inline Nanos from_us(double us) { return Nanos{std::llround(us * 1000.0)}; }

struct PhyParams {
  double data_rate = 11.0;    // bits/us (== Mb/s)
  double control_rate = 2.0;  // bits/us
  Nanos plcp_time = Nanos{144'000};
  Nanos phy_header_time = Nanos{48'000};
  std::int64_t mac_header_bytes = 34;
  std::int64_t pspoll_bytes = 20;
  std::int64_t ack_bytes = 14;
  std::int64_t ap_payload_bytes = 512;
  std::int64_t sta_payload_bytes = 512;
  Nanos slot_time = Nanos{20'000};
  Nanos sifs = Nanos{10'000};
  Nanos difs = Nanos{50'000};
  Nanos eifs = Nanos{364'000};

  /// Throws ConfigError naming the first violated invariant.
  void validate() const {
    auto positive = [](bool ok, const char* name) {
      if (!ok) throw ConfigError(std::string("phy: ") + name + " must be strictly positive");
    };
    positive(data_rate > 0.0, "data_rate");
    positive(control_rate > 0.0, "control_rate");
    positive(plcp_time.count() > 0, "plcp_time");
    positive(phy_header_time.count() > 0, "phy_header_time");
    positive(mac_header_bytes > 0, "mac_header_bytes");
    positive(pspoll_bytes > 0, "pspoll_bytes");
    positive(ack_bytes > 0, "ack_bytes");
    positive(ap_payload_bytes > 0, "ap_payload_bytes");
    positive(sta_payload_bytes > 0, "sta_payload_bytes");
    positive(slot_time.count() > 0, "slot_time");
    positive(sifs.count() > 0, "sifs");
    positive(difs.count() > 0, "difs");
    positive(eifs.count() > 0, "eifs");
    if (control_rate > data_rate) throw ConfigError("phy: control_rate must not exceed data_rate");
    if (difs <= sifs) throw ConfigError("phy: difs must exceed sifs");
    if (eifs <= difs) throw ConfigError("phy: eifs must exceed difs");
  }

  friend bool operator==(const PhyParams&, const PhyParams&) = default;
};

struct EventDurations {
  Nanos t_ack{};
  Nanos t_pspl{};
  Nanos t_ap_data{};
  Nanos t_sta_data{};
  Nanos t_s_pspl{};  // PS-POLL + SIFS + ACK + DIFS
  Nanos t_s_sta{};   // STA data success
  Nanos t_c{};       // collision
  // Filled by complete_with_pspoll once the PS-POLL attempt rate is known.
  std::optional<double> e_t_pspl_us;
  std::optional<double> t_s_ap_us;

  friend bool operator==(const EventDurations&, const EventDurations&) = default;
};

namespace detail {
inline Nanos airtime(std::int64_t bytes, double rate_bits_per_us) {
  return Nanos{std::llround(static_cast<double>(bytes) * 8.0 * 1000.0 / rate_bits_per_us)};
}
}  // namespace detail

/// All durations except the PS-POLL-dependent ones. Only the rates are
/// checked; zero-length frames and zero preambles are allowed here.
inline EventDurations frame_durations(const PhyParams& p) {
  if (!(p.data_rate > 0.0) || !(p.control_rate > 0.0))
    throw ConfigError("phy: rates must be strictly positive");
  const Nanos preamble = p.plcp_time + p.phy_header_time;
  EventDurations d;
  d.t_ack = preamble + detail::airtime(p.ack_bytes, p.control_rate);
  d.t_pspl = preamble + detail::airtime(p.pspoll_bytes, p.control_rate);
  d.t_ap_data = preamble + detail::airtime(p.mac_header_bytes + p.ap_payload_bytes, p.data_rate);
  d.t_sta_data = preamble + detail::airtime(p.mac_header_bytes + p.sta_payload_bytes, p.data_rate);
  d.t_s_sta = p.sifs + p.difs + d.t_ack + d.t_sta_data;
  d.t_s_pspl = d.t_pspl + p.sifs + p.difs + d.t_ack;
  d.t_c = std::max(d.t_ap_data, d.t_sta_data) + p.eifs;
  return d;
}

/// Mean time from the end of an AP success until the PS-POLL exchange
/// completes, with the residual countdown treated as geometric at rate
/// beta_ps per slot.
inline double expected_pspoll_service_time(const EventDurations& d, double beta_ps, Nanos slot) {
  if (!(beta_ps > 0.0) || beta_ps > 1.0)
    throw ModelBreakdown("PS-POLL attempt rate must lie in (0,1], got " + std::to_string(beta_ps));
  return to_us(d.t_s_pspl) + (1.0 - beta_ps) / beta_ps * to_us(slot);
}

/// Returns a copy with e_t_pspl_us and t_s_ap_us filled in.
inline EventDurations complete_with_pspoll(EventDurations d, const PhyParams& p, double beta_ps) {
  const double e = expected_pspoll_service_time(d, beta_ps, p.slot_time);
  d.e_t_pspl_us = e;
  d.t_s_ap_us = to_us(p.sifs + p.difs + d.t_ack + d.t_ap_data) + e;
  return d;
}

}  // namespace psmsat
