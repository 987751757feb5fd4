#include <gtest/gtest.h>

#include <cmath>

#include "fluent/analysis.hpp"
#include "fluent/binding.hpp"
#include "fluent/error.hpp"
#include "fluent/models.hpp"
#include "generators.hpp"

using namespace fluent;
namespace ft = fluent::testing;

namespace {

RunConfig steps(std::int64_t n) {
  RunConfig c;
  c.steps = n;
  return c;
}

double max_speed_error(const GovernorParams& p, double horizon) {
  RunConfig c;
  c.duration = horizon;
  const TraceSet t = run_hierarchy(build_governor(p), {}, c);
  double worst = 0.0;
  for (const auto& s : *t.level("machine").find("engine"))
    worst = std::max(worst, std::abs(s.activation - ft::governor_speed_exact(p.K, p.d, p.c, p.load, s.time)));
  return worst;
}

}  // namespace

// --- governor --------------------------------------------------------------

TEST(Governor, SettlesWithinOnePercent) {
  const GovernorParams p;
  RunConfig c;
  c.duration = p.horizon;
  const TraceSet t = run_hierarchy(build_governor(p), {}, c);
  const double settle = governor_settling_time(p);
  // the oracle itself must agree that the horizon is long enough
  for (double tt = settle; tt <= p.horizon; tt += 0.01)
    ASSERT_LT(std::abs(ft::governor_speed_exact(p.K, p.d, p.c, p.load, tt) - p.d), 0.01 * p.d);
  int checked = 0;
  for (const auto& s : *t.level("machine").find("engine"))
    if (s.time >= settle) {
      EXPECT_LT(std::abs(s.activation - p.d) / p.d, 0.01) << s.time;
      ++checked;
    }
  EXPECT_GT(checked, 1000);
  // the upper level measures the same speed through its grounding
  const auto& up = *t.level("governor").find("speed");
  EXPECT_LT(std::abs(up.back().activation - p.d), 0.01);
}

TEST(Governor, OtherStableParameters) {
  for (const GovernorParams p : {GovernorParams{2.0, 1.5, 0.5, 2.0, 1e-3, 10.0},
                                 GovernorParams{0.5, 3.0, 2.0, 3.0, 1e-3, 10.0}}) {
    EXPECT_LT(max_speed_error(p, p.horizon), 0.01 * p.d);
  }
}

TEST(Governor, ZeroGainKeepsTheValveConstant) {
  GovernorParams p;
  p.K = 0.0;
  RunConfig c;
  c.duration = 5.0;
  const TraceSet t = run_hierarchy(build_governor(p), {}, c);
  for (const char* level : {"machine", "governor"}) {
    const auto& valve = *t.level(level).find("valve");
    ASSERT_FALSE(valve.empty());
    for (const auto& s : valve) EXPECT_EQ(s.activation, valve.front().activation) << level;
  }
}

TEST(Governor, ZeroSetpointGivesZeroChronicles) {
  GovernorParams p;
  p.d = 0.0;
  RunConfig c;
  c.duration = 3.0;
  const TraceSet t = run_hierarchy(build_governor(p), {}, c);
  for (const auto& lt : t.levels)
    for (const auto& [id, ch] : lt.chronicles)
      for (const auto& s : ch) EXPECT_EQ(s.activation, 0.0) << lt.level << "/" << id;
}

TEST(Governor, FirstOrderConvergence) {
  double previous = 0.0;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    GovernorParams p;
    p.dt = dt;
    const double err = max_speed_error(p, p.horizon);
    if (previous > 0.0) {
      EXPECT_GE(previous / err, 1.8) << dt;
    }
    previous = err;
  }
}

TEST(Governor, ParameterChecks) {
  GovernorParams p;
  p.c = 0.0;
  EXPECT_THROW(build_governor(p), InvalidParams);
  p = {};
  p.K = -1.0;
  EXPECT_THROW(build_governor(p), InvalidParams);
  p = {};
  p.dt = 0.0;
  EXPECT_THROW(build_governor(p), InvalidParams);
}

// --- multiplier ------------------------------------------------------------

TEST(Multiplier, SixTimesFive) {
  const Hierarchy h = build_multiplier();
  const TraceSet t = run_hierarchy(h, {}, steps(settling_steps(h)));
  EXPECT_EQ(multiplier_result(t), "30");
}

TEST(Multiplier, AllProductsAndSums) {
  const Hierarchy h = build_multiplier();
  const RunConfig c = steps(settling_steps(h));
  for (char op : {'*', '+'})
    for (int a = 0; a <= 9; ++a)
      for (int b = 0; b <= 9; ++b) {
        const std::string term = std::to_string(a) + op + std::to_string(b);
        const int expected = op == '*' ? a * b : a + b;
        const TraceSet t = run_hierarchy(h, multiplier_inputs(term), c);
        EXPECT_EQ(multiplier_result(t), std::to_string(expected)) << term;
      }
}

TEST(Multiplier, RegistersHoldTheOperandsAndProduct) {
  const Hierarchy h = build_multiplier({1, 1, "7*9", true});
  const TraceSet t = run_hierarchy(h, {}, steps(settling_steps(h)));
  const auto& reg = t.level("register");
  EXPECT_EQ(reg.find("reg.x")->back().activation, 7.0);
  EXPECT_EQ(reg.find("reg.y")->back().activation, 9.0);
  EXPECT_EQ(reg.find("reg.P")->back().activation, 63.0);
}

TEST(Multiplier, UndefinedBeforeTheSignalArrives) {
  const Hierarchy h = build_multiplier();
  const TraceSet t = run_hierarchy(h, {}, steps(1));
  EXPECT_EQ(multiplier_result(t), std::nullopt);
}

TEST(Multiplier, SyncRatios) {
  for (int r : {1, 2, 4}) {
    const Hierarchy h = build_multiplier({r, r, "8*6", true});
    const TraceSet t = run_hierarchy(h, {}, steps(settling_steps(h)));
    EXPECT_EQ(multiplier_result(t), "48") << r;
  }
  EXPECT_THROW(build_multiplier({0, 1, "1*1", true}), InvalidParams);
  EXPECT_THROW(build_multiplier({1, 1, "1/1", true}), TermParseError);
}

TEST(Multiplier, CommutesExactlyAtEveryRatio) {
  for (int r : {1, 2, 4}) {
    const Hierarchy h = build_multiplier({r, r, "6*5", true});
    RunConfig c = steps(settling_steps(h) + 40 * r * r);
    for (const char* upper : {"binary", "decimal"}) {
      const CommuteReport rep = check_commute(h, upper, c, 0.0);
      EXPECT_TRUE(rep.pass) << upper << " r=" << r;
      EXPECT_EQ(rep.max_discrepancy, 0.0);
    }
  }
}

TEST(Multiplier, CorruptedGroundingRowBreaksCommutativity) {
  Hierarchy h = build_multiplier();
  auto& g = h.groundings.at("decimal").at("TENS.d3");
  auto& rows = std::get<op::Table>(g.state_op).rows;
  // row index bits: P.0..P.6 then VALID; 30 with VALID set
  const std::size_t row = 30 | (1u << 7);
  ASSERT_EQ(row, 158u);
  ASSERT_EQ(rows.at(row), 1.0);
  rows[row] = 0.0;
  const CommuteReport rep = check_commute(h, "decimal", steps(settling_steps(h) + 40), 0.0);
  EXPECT_FALSE(rep.pass);
  EXPECT_GE(rep.max_discrepancy, 1.0);
}

// --- binary adder ----------------------------------------------------------

TEST(BinaryAdder, SixPlusFour) {
  const Hierarchy h = build_adder_model(3, 6, 4);
  const TraceSet t = run_hierarchy(h, {}, steps(settling_steps(h)));
  EXPECT_EQ(adder_sum_bits(t, 3), (std::vector<int>{1, 0, 1, 0}));
}

TEST(BinaryAdder, ExhaustiveFourBit) {
  const Hierarchy h = build_adder_model(4, 0, 0);
  const RunConfig c = steps(settling_steps(h));
  for (unsigned a = 0; a < 16; ++a)
    for (unsigned b = 0; b < 16; ++b) {
      const TraceSet t = run_hierarchy(h, adder_inputs(4, a, b), c);
      const auto bits = adder_sum_bits(t, 4);
      unsigned value = 0;
      for (int bit : bits) value = value * 2 + static_cast<unsigned>(bit);
      EXPECT_EQ(value, a + b) << a << "+" << b;
    }
}

// --- clock -----------------------------------------------------------------

TEST(Clock, PeriodWithinOnePercent) {
  for (double period : {0.5, 1.0, 3.0}) {
    LevelModel l;
    l.name = "clk";
    l.progression = {Progression::Mode::continuous, period / 1000.0};
    l.add(build_clock(period));
    RunConfig c;
    c.duration = 6.0 * period;
    const auto measured = ft::rising_edge_period(*run_standalone(l, {}, c).level("clk").find("clock"));
    RunConfig fine = c;
    fine.dt = period / 10000.0;
    const auto reference = ft::rising_edge_period(*run_standalone(l, {}, fine).level("clk").find("clock"));
    ASSERT_TRUE(measured && reference);
    EXPECT_LT(std::abs(*measured - period) / period, 0.01);
    EXPECT_LT(std::abs(*reference - period) / period, 0.01);
    EXPECT_LT(std::abs(*measured - *reference) / period, 0.01);
  }
}

TEST(Clock, ActivationIsBinary) {
  LevelModel l;
  l.name = "clk";
  l.progression = {Progression::Mode::continuous, 1e-3};
  l.add(build_clock(1.0));
  RunConfig c;
  c.duration = 2.0;
  const TraceSet t = run_standalone(l, {}, c);
  for (const auto& s : *t.level("clk").find("clock"))
    EXPECT_TRUE(s.activation == 0.0 || s.activation == 1.0);
  EXPECT_THROW(build_clock(0.0), InvalidParams);
}

TEST(Clock, GatedTermFollowsTheClock) {
  const Hierarchy h = build_clocked_term("6*2", 1.0, 1e-3);
  RunConfig c;
  c.duration = 3.0;
  const TraceSet t = run_hierarchy(h, {}, c);
  const auto& lt = t.level(h.levels.front().name);
  const auto& clock = *lt.find("clock");
  const auto& bat = *lt.find("BAT");
  ASSERT_EQ(clock.size(), bat.size());
  int high = 0;
  for (std::size_t i = 0; i < bat.size(); ++i) {
    EXPECT_LE(bat[i].activation, clock[i].activation);
    high += bat[i].activation > 0.0 ? 1 : 0;
  }
  EXPECT_GT(high, 0);
}
