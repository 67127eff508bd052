#include <gtest/gtest.h>

#include <random>

#include "psmsat/phy_timing.hpp"

using namespace psmsat;
using namespace std::chrono_literals;

TEST(PhyTiming, DefaultFrameDurations) {
  const auto d = frame_durations(PhyParams{});
  // 192 us preamble + 14 B at 2 Mb/s.
  EXPECT_EQ(d.t_ack, 248us);
  EXPECT_EQ(d.t_pspl, 272us);
  // 192 + 546*8/11 = 589.0909.. us, stored to the nearest ns.
  EXPECT_EQ(d.t_ap_data.count(), 589'091);
  EXPECT_EQ(d.t_sta_data, d.t_ap_data);
  EXPECT_EQ(d.t_s_pspl, 580us);
  EXPECT_EQ(d.t_s_sta.count(), 10'000 + 50'000 + 248'000 + 589'091);
  EXPECT_EQ(d.t_c.count(), 589'091 + 364'000);
  EXPECT_FALSE(d.e_t_pspl_us.has_value());
  EXPECT_FALSE(d.t_s_ap_us.has_value());
}

TEST(PhyTiming, ZeroLengthFrameIsPreambleOnly) {
  PhyParams p;
  p.ack_bytes = 0;
  p.plcp_time = 0ns;
  p.phy_header_time = 0ns;
  EXPECT_EQ(frame_durations(p).t_ack, 0ns);
}

TEST(PhyTiming, RejectsNonPositiveRates) {
  PhyParams p;
  p.data_rate = 0.0;
  EXPECT_THROW(frame_durations(p), ConfigError);
  p = {};
  p.control_rate = -1.0;
  EXPECT_THROW(frame_durations(p), ConfigError);
}

TEST(PhyTiming, ValidateOrdering) {
  EXPECT_NO_THROW(PhyParams{}.validate());
  PhyParams p;
  p.difs = p.sifs;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.control_rate = 54.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.pspoll_bytes = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(PhyTiming, MonotoneInSizesAndRates) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> bytes(1, 2000);
  std::uniform_real_distribution<double> rate(1.0, 54.0);
  for (int i = 0; i < 500; ++i) {
    PhyParams p;
    p.ap_payload_bytes = bytes(rng);
    p.sta_payload_bytes = bytes(rng);
    p.data_rate = rate(rng);
    p.control_rate = std::min(p.data_rate, rate(rng));
    const auto base = frame_durations(p);

    PhyParams bigger = p;
    bigger.ap_payload_bytes += 100;
    bigger.sta_payload_bytes += 100;
    bigger.ack_bytes += 10;
    const auto b = frame_durations(bigger);
    EXPECT_GE(b.t_ap_data, base.t_ap_data);
    EXPECT_GE(b.t_sta_data, base.t_sta_data);
    EXPECT_GE(b.t_ack, base.t_ack);
    EXPECT_GE(b.t_c, base.t_c);

    PhyParams faster = p;
    faster.data_rate *= 2.0;
    faster.control_rate *= 2.0;
    const auto f = frame_durations(faster);
    EXPECT_LE(f.t_ap_data, base.t_ap_data);
    EXPECT_LE(f.t_ack, base.t_ack);
    EXPECT_LE(f.t_s_sta, base.t_s_sta);

    EXPECT_GE(base.t_c, std::max(base.t_ap_data, base.t_sta_data));
    EXPECT_EQ(frame_durations(p), base);  // pure
  }
}

TEST(PhyTiming, PspollServiceTime) {
  EventDurations d;
  d.t_s_pspl = 580us;
  EXPECT_DOUBLE_EQ(expected_pspoll_service_time(d, 1.0, 20us), 580.0);
  EXPECT_DOUBLE_EQ(expected_pspoll_service_time(d, 0.5, 20us), 600.0);
  EXPECT_THROW(expected_pspoll_service_time(d, 0.0, 20us), ModelBreakdown);
  EXPECT_THROW(expected_pspoll_service_time(d, 1.5, 20us), ModelBreakdown);

  double prev = std::numeric_limits<double>::infinity();
  for (double b = 0.01; b <= 1.0; b += 0.01) {
    const double e = expected_pspoll_service_time(d, b, 20us);
    EXPECT_LT(e, prev);
    EXPECT_GE(e, 580.0);
    prev = e;
  }
}

TEST(PhyTiming, CompleteWithPspoll) {
  const PhyParams p;
  const auto d = complete_with_pspoll(frame_durations(p), p, 0.5);
  ASSERT_TRUE(d.e_t_pspl_us && d.t_s_ap_us);
  EXPECT_DOUBLE_EQ(*d.e_t_pspl_us, 600.0);
  EXPECT_NEAR(*d.t_s_ap_us, 10 + 50 + 248 + 589.091 + 600.0, 1e-9);
  EXPECT_GT(*d.t_s_ap_us, to_us(d.t_s_sta));
}
