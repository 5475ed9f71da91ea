#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "posture/stimulus.hpp"

using namespace posture;

namespace {

std::size_t pow3(int m) {
  std::size_t p = 1;
  for (int i = 0; i < m; ++i) p *= 3;
  return p;
}

} // namespace

TEST(Msequence, PeriodIsThreeToTheMMinusOne) {
  for (int m = 2; m <= 9; ++m) {
    PrtsConfig cfg;
    cfg.register_length = m;
    EXPECT_EQ(ternary_msequence(cfg).size(), pow3(m) - 1) << "m=" << m;
    EXPECT_EQ(cfg.period(), pow3(m) - 1);
  }
}

// A maximal-length sequence visits every nonzero register state exactly once,
// so every nonzero m-symbol window appears once per (cyclic) period.
TEST(Msequence, EveryNonzeroWindowAppearsOnce) {
  for (int m = 2; m <= 8; ++m) {
    PrtsConfig cfg;
    cfg.register_length = m;
    const auto s = ternary_msequence(cfg);
    std::set<std::vector<int>> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<int> w(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) w[static_cast<std::size_t>(j)] = s[(i + static_cast<std::size_t>(j)) % s.size()];
      EXPECT_FALSE(std::all_of(w.begin(), w.end(), [](int v) { return v == 0; }));
      seen.insert(w);
    }
    EXPECT_EQ(seen.size(), s.size()) << "m=" << m;
  }
}

TEST(Msequence, SymbolsAreBalanced) {
  PrtsConfig cfg;
  const auto s = ternary_msequence(cfg);
  const auto plus = std::count(s.begin(), s.end(), 1);
  const auto minus = std::count(s.begin(), s.end(), -1);
  const auto zero = std::count(s.begin(), s.end(), 0);
  EXPECT_EQ(plus, 81);
  EXPECT_EQ(minus, 81);
  EXPECT_EQ(zero, 80);
}

TEST(Msequence, InitialStateRotatesTheSequence) {
  PrtsConfig a, b;
  b.initial_state = 7;
  const auto sa = ternary_msequence(a), sb = ternary_msequence(b);
  auto rotated_by = [&](std::size_t shift) {
    for (std::size_t i = 0; i < sa.size(); ++i)
      if (sb[i] != sa[(i + shift) % sa.size()]) return false;
    return true;
  };
  bool found = false;
  for (std::size_t shift = 1; shift < sa.size() && !found; ++shift) found = rotated_by(shift);
  EXPECT_TRUE(found);
}

TEST(Prts, DefaultTraceCoversTheSimulationWindow) {
  const PrtsConfig cfg;
  const TiltTrace t = generate_prts(cfg);
  EXPECT_EQ(t.size(), 12100u);
  EXPECT_DOUBLE_EQ(t.dt, 0.01);
  EXPECT_DOUBLE_EQ(cfg.duration(), 121.0);
  EXPECT_EQ(t.samples.front(), 0.0);
}

TEST(Prts, PeakToPeakMatchesConfiguration) {
  PrtsConfig cfg;
  const TiltTrace t = generate_prts(cfg, 0.001);
  const auto [lo, hi] = std::minmax_element(t.samples.begin(), t.samples.end());
  EXPECT_NEAR(*hi - *lo, deg_to_rad(2.0), 1e-15);
}

TEST(Prts, RepetitionsAreBitIdentical) {
  const TiltTrace t = generate_prts(PrtsConfig{});
  const std::size_t half = t.size() / 2;
  for (std::size_t i = 0; i < half; ++i) ASSERT_EQ(t.samples[i], t.samples[i + half]) << i;
}

TEST(Prts, AmplitudeScalesLinearly) {
  PrtsConfig a, b;
  b.peak_to_peak = 2.0 * a.peak_to_peak;
  const auto ta = generate_prts(a), tb = generate_prts(b);
  for (std::size_t i = 0; i < ta.size(); ++i) ASSERT_EQ(tb.samples[i], 2.0 * ta.samples[i]);
}

TEST(Prts, VelocityIsPiecewiseConstantTernary) {
  PrtsConfig cfg;
  const double dt = 0.01;
  const TiltTrace t = generate_prts(cfg, dt);
  const auto seq = ternary_msequence(cfg);
  const std::size_t per_stage = 25;
  double unit = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double v = t.samples[k + 1] - t.samples[k];
    const int sym = seq[(k / per_stage) % seq.size()];
    if (sym == 0) {
      ASSERT_EQ(v, 0.0);
    } else {
      if (unit == 0.0) unit = std::abs(v);
      ASSERT_NEAR(v, sym * unit, 1e-15);
    }
  }
}

TEST(Prts, AgreesWithIndependentRampConstruction) {
  PrtsConfig cfg;
  const auto seq = ternary_msequence(cfg);
  const auto ref = oracle::ramp_tilt(seq, cfg.stage_duration, cfg.repetitions, cfg.peak_to_peak, 0.001);
  const auto t = generate_prts(cfg, 0.001);
  ASSERT_EQ(ref.size(), t.size());
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(t.samples[i], ref[i], 1e-15);
}

TEST(Prts, RejectsInvalidConfiguration) {
  PrtsConfig cfg;
  cfg.register_length = 1;
  EXPECT_THROW(generate_prts(cfg), ConfigError);
  cfg.register_length = 10;
  EXPECT_THROW(generate_prts(cfg), ConfigError);
  cfg = {};
  cfg.initial_state = 0;
  EXPECT_THROW(generate_prts(cfg), ConfigError);
  cfg = {};
  cfg.repetitions = 0;
  EXPECT_THROW(generate_prts(cfg), ConfigError);
  cfg = {};
  cfg.stage_duration = 0.255;
  EXPECT_THROW(generate_prts(cfg, 0.01), ConfigError);
  cfg = {};
  cfg.peak_to_peak = -1.0;
  EXPECT_THROW(generate_prts(cfg), ConfigError);
}

TEST(Units, DegreeConversionRoundTrips) {
  EXPECT_DOUBLE_EQ(deg_to_rad(180.0), std::numbers::pi);
  EXPECT_DOUBLE_EQ(rad_to_deg(deg_to_rad(2.8533)), 2.8533);
}
