#include "adplan/feedback.hpp"

#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"

namespace adplan {
namespace {

Contract week_contract(double booked) {
  Contract c = fixtures::contract("w", "TRUE", booked, parse_iso8601("2012-01-01T12:00:00Z"),
                                  parse_iso8601("2012-01-08T12:00:00Z"));
  return c;
}

DeliveryState state_for(const Contract& c, double delivered, Timestamp t, bool boost = false) {
  return {delivered, linear_goal(c, t), c.booked_demand - delivered, boost};
}

TEST(LinearGoal, WeekContractExamples) {
  Contract c = week_contract(7e6);
  EXPECT_DOUBLE_EQ(linear_goal(c, parse_iso8601("2012-01-02T12:00:00Z")), 1e6);
  EXPECT_NEAR(linear_goal(c, parse_iso8601("2012-01-06T23:59:00Z")), 5.5e6, 1e3);
  EXPECT_EQ(linear_goal(c, c.start), 0.0);
  EXPECT_EQ(linear_goal(c, c.start - std::chrono::hours(5)), 0.0);
  EXPECT_EQ(linear_goal(c, c.end + std::chrono::hours(5)), 7e6);
}

TEST(Lag, InvertsTheLinearGoal) {
  Contract c = week_contract(7e6);
  Timestamp t = parse_iso8601("2012-01-05T00:00:00Z");
  EXPECT_NEAR(delivery_lag_hours(c, linear_goal(c, t - std::chrono::hours(6)), t), 6.0, 1e-9);
  EXPECT_NEAR(delivery_lag_hours(c, linear_goal(c, t + std::chrono::hours(6)), t), -6.0, 1e-9);
}

TEST(Apply, BehindContractIsBoosted) {
  Contract c = week_contract(7e6);
  FeedbackConfig cfg;
  cfg.delta_hours = 12;
  Timestamp t = c.start + std::chrono::hours(84);  // noon on day 4
  FeedbackResult r = apply_feedback(state_for(c, 2e6, t), c, t, cfg, 2);
  EXPECT_NEAR(r.lag_hours, 36.0, 1e-9);
  EXPECT_TRUE(r.boost_active);
  EXPECT_DOUBLE_EQ(r.adjusted_remaining, 5e6 * cfg.boost_behind);
}

TEST(Apply, OnTrackIsUnchanged) {
  Contract c = week_contract(7e6);
  Timestamp t = c.start + std::chrono::hours(50);
  FeedbackResult r = apply_feedback(state_for(c, linear_goal(c, t), t), c, t, FeedbackConfig{}, 2);
  EXPECT_EQ(r.adjusted_remaining, c.booked_demand - linear_goal(c, t));
  EXPECT_FALSE(r.boost_active);
}

TEST(Apply, AheadContractIsDamped) {
  Contract c = week_contract(7e6);
  Timestamp t = c.start + std::chrono::hours(50);
  double delivered = linear_goal(c, t + std::chrono::hours(6));
  FeedbackResult r = apply_feedback(state_for(c, delivered, t), c, t, FeedbackConfig{}, 2);
  EXPECT_DOUBLE_EQ(r.adjusted_remaining, (7e6 - delivered) / 10);
}

// With 1h cycles the boost, once on, stays until the lag is within 2h even
// though a fresh contract would only be boosted beyond 4h.
TEST(Apply, BoostIsReleasedWithinTwoCycles) {
  Contract c = week_contract(7e6);
  FeedbackConfig cfg;
  Timestamp t = c.start + std::chrono::hours(50);
  auto at_lag = [&](double h, bool boost) {
    double delivered = linear_goal(c, t - std::chrono::minutes(static_cast<long>(h * 60)));
    return apply_feedback(state_for(c, delivered, t, boost), c, t, cfg, 1.0);
  };
  EXPECT_FALSE(at_lag(3, false).boost_active);
  EXPECT_TRUE(at_lag(5, false).boost_active);
  EXPECT_TRUE(at_lag(3, true).boost_active);
  EXPECT_DOUBLE_EQ(at_lag(3, true).adjusted_remaining, at_lag(3, false).adjusted_remaining * cfg.boost_behind);
  EXPECT_FALSE(at_lag(1.5, true).boost_active);
  EXPECT_DOUBLE_EQ(at_lag(1.5, true).adjusted_remaining, at_lag(1.5, false).adjusted_remaining);
}

TEST(Apply, OutsideTheFlightIsANoOp) {
  Contract c = week_contract(7e6);
  DeliveryState s{0, 0, 7e6, true};
  FeedbackResult r = apply_feedback(s, c, c.start - std::chrono::hours(1), FeedbackConfig{}, 2);
  EXPECT_EQ(r.adjusted_remaining, 7e6);
  EXPECT_FALSE(r.boost_active);
}

TEST(Config, Validation) {
  FeedbackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.boost_behind = 1;  // boost disabled
  EXPECT_NO_THROW(cfg.validate());
  for (auto mutate : {+[](FeedbackConfig& f) { f.delta_hours = 0; }, +[](FeedbackConfig& f) { f.boost_behind = 0.5; },
                      +[](FeedbackConfig& f) { f.damp_ahead = 0.9; },
                      +[](FeedbackConfig& f) { f.release_within_cycles = -1; }}) {
    FeedbackConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), error);
  }
}

TEST(FeedbackProperty, IdempotentBoundedAndNoOpInBand) {
  std::mt19937_64 rng(41);
  Contract c = week_contract(1e6);
  for (int round = 0; round < 5000; ++round) {
    FeedbackConfig cfg;
    cfg.delta_hours = std::uniform_real_distribution<double>(0.5, 24)(rng);
    cfg.boost_behind = std::uniform_real_distribution<double>(1, 3)(rng);
    cfg.damp_ahead = std::uniform_real_distribution<double>(1, 20)(rng);
    Timestamp t = c.start + std::chrono::minutes(std::uniform_int_distribution<long>(0, 7 * 24 * 60 - 1)(rng));
    double delivered = std::uniform_real_distribution<double>(0, 1e6)(rng);
    DeliveryState s = state_for(c, delivered, t, std::bernoulli_distribution(0.5)(rng));
    FeedbackResult a = apply_feedback(s, c, t, cfg, 2), b = apply_feedback(s, c, t, cfg, 2);
    EXPECT_EQ(a.adjusted_remaining, b.adjusted_remaining);
    EXPECT_GE(a.adjusted_remaining, 0.0);
    EXPECT_LE(a.adjusted_remaining, c.booked_demand * cfg.boost_behind);
    if (!s.boost_active && std::abs(a.lag_hours) <= cfg.delta_hours) { EXPECT_EQ(a.adjusted_remaining, s.remaining); }
  }
}

}  // namespace
}  // namespace adplan
