#include <gtest/gtest.h>

#include "psmsat/analysis.hpp"
#include "psmsat/mc_oracle.hpp"

using namespace psmsat;

namespace {
::testing::AssertionResult within_se(const Estimate& e, double target, double k) {
  const double tol = k * e.standard_error + 1e-12;
  if (std::abs(e.mean - target) <= tol) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << "mean " << e.mean << " vs " << target << " (" << k << " SE = " << tol << ")";
}
}  // namespace

TEST(McOracle, NoApMeansUninterrupted) {
  const auto st = simulate_sta_cycles(0.0, BackoffSchedule({32}), 200'000, 5);
  EXPECT_TRUE(within_se(st.data_slots, 15.5, 5));
  EXPECT_EQ(st.pspoll_slots.mean, 0.0);
  EXPECT_EQ(st.ap_successes.mean, 0.0);
  EXPECT_EQ(st.sta_attempts.mean, 1.0);

  const auto ap = simulate_ap_cycles(0.0, BackoffSchedule({32, 64}), 200'000, 5);
  EXPECT_EQ(ap.attempts.mean, 1.0);
  EXPECT_TRUE(within_se(ap.slots, 15.5, 5));
}

TEST(McOracle, HandCaseThirds) {
  const auto st = simulate_sta_cycles(0.5, BackoffSchedule({2}), 1'000'000, 17);
  EXPECT_TRUE(within_se(st.data_slots, 1.0 / 3.0, 3));
  EXPECT_TRUE(within_se(st.pspoll_slots, 1.0 / 3.0, 3));
  EXPECT_TRUE(within_se(st.ap_successes, 1.0 / 3.0, 3));
}

TEST(McOracle, ApCyclesTwoStageExample) {
  const auto ap = simulate_ap_cycles(0.1, BackoffSchedule({32, 64}), 1'000'000, 23);
  EXPECT_TRUE(within_se(ap.attempts, 1.1, 3));
  EXPECT_TRUE(within_se(ap.slots, 18.65, 3));
}

TEST(McOracle, MatchesClosedFormsOnGrid) {
  for (double beta : {0.05, 0.3}) {
    for (const std::vector<std::int64_t>& w : {std::vector<std::int64_t>{4, 8}, {16, 32, 64, 64}}) {
      const BackoffSchedule s(w);
      const auto m = restart_means(beta, s);
      const auto st = simulate_sta_cycles(beta, s, 400'000, 31, 4);
      EXPECT_TRUE(within_se(st.data_slots, m.data_slots, 4));
      EXPECT_TRUE(within_se(st.pspoll_slots, m.pspoll_slots, 4));
      EXPECT_TRUE(within_se(st.ap_successes, m.ap_successes, 4));
    }
  }
}

TEST(McOracle, DeterministicPerSeedAndShards) {
  const auto s = default_schedule();
  const auto a = simulate_sta_cycles(0.06, s, 50'000, 9, 4);
  const auto b = simulate_sta_cycles(0.06, s, 50'000, 9, 4);
  EXPECT_EQ(a.data_slots.mean, b.data_slots.mean);
  EXPECT_EQ(a.pspoll_slots.standard_error, b.pspoll_slots.standard_error);
  const auto c = simulate_sta_cycles(0.06, s, 50'000, 10, 4);
  EXPECT_NE(a.data_slots.mean, c.data_slots.mean);
  EXPECT_EQ(a.n_cycles, 50'000);
}

TEST(McOracle, StandardErrorShrinks) {
  const auto s = BackoffSchedule({16, 32});
  const auto small = simulate_sta_cycles(0.1, s, 10'000, 3);
  const auto big = simulate_sta_cycles(0.1, s, 1'000'000, 3);
  const double ratio = small.data_slots.standard_error / big.data_slots.standard_error;
  EXPECT_NEAR(ratio, 10.0, 1.5);
}

TEST(McOracle, RejectsBadArguments) {
  EXPECT_THROW(simulate_sta_cycles(1.0, default_schedule(), 10, 1), std::invalid_argument);
  EXPECT_THROW(simulate_ap_cycles(0.1, default_schedule(), 0, 1), std::invalid_argument);
}
