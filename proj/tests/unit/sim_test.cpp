#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pourbench/errors.hpp"
#include "pourbench/sim.hpp"

using namespace pourbench;

namespace {

SensorModel ideal_sensor() {
  SensorModel s;
  s.latency_s = 0.0;
  s.impact_gain = 0.0;
  s.noise_std = 0.0;
  return s;
}

// Tilt at which the container holds `excess` mL less than vol_total.
double tilt_for_excess(const ContainerSpec& c, double vol_total, double excess) {
  return critical_angle(c, vol_total - excess);
}

}  // namespace

TEST(Sim, ConfigValidation) {
  SimConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  LiquidSpec thin{"thin", 0.5};
  EXPECT_THROW(thin.validate(), ConfigError);
  SensorModel s;
  s.noise_std = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Sim, InitState) {
  ContainerSpec c("x", 80.0, 100.0);
  PourState s = init_state(c, 300.0);
  EXPECT_EQ(s.v_in, 300.0);
  EXPECT_EQ(s.v_poured, 0.0);
  EXPECT_EQ(s.theta, 0.0);
  EXPECT_NO_THROW(init_state(c, capacity_upright(c)));
  EXPECT_THROW(init_state(c, 600.0), ConfigError);
  EXPECT_THROW(init_state(c, 0.0), ConfigError);
}

TEST(Sim, OutflowRateExamples) {
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  PourState s = init_state(c, 300.0);
  EXPECT_EQ(outflow_rate(c, LiquidSpec{}, s, cfg), 0.0);

  s.theta = tilt_for_excess(c, 300.0, 10.0);
  EXPECT_NEAR(outflow_rate(c, LiquidSpec{}, s, cfg), 200.0, 1e-3);
  LiquidSpec syrup{"syrup", 2000.0};
  EXPECT_NEAR(std::pow(2000.0, 0.25), 6.687, 1e-3);
  EXPECT_NEAR(outflow_rate(c, syrup, s, cfg), 200.0 / std::pow(2000.0, 0.25), 1e-3);
  EXPECT_NEAR(outflow_rate(c, syrup, s, cfg), 29.9, 0.05);
  EXPECT_NEAR(outflow_time_constant(syrup, cfg), 0.05 * std::pow(2000.0, 0.25), 1e-12);
}

TEST(Sim, QuiescentStepOnlyAdvancesTime) {
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  PourState s = init_state(c, 300.0);
  PourState n = advance(c, LiquidSpec{}, s, 0.0, cfg);
  EXPECT_EQ(n.theta, s.theta);
  EXPECT_EQ(n.v_in, s.v_in);
  EXPECT_EQ(n.v_poured, s.v_poured);
  EXPECT_EQ(n.q, 0.0);
  EXPECT_DOUBLE_EQ(n.t, cfg.dt);
}

TEST(Sim, SingleStepMovesRateTimesDt) {
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  PourState s = init_state(c, 300.0);
  s.theta = tilt_for_excess(c, 300.0, 10.0);
  PourState n = advance(c, LiquidSpec{}, s, 0.0, cfg);
  EXPECT_NEAR(n.v_poured, 200.0 / 60.0, 1e-3);
  EXPECT_NEAR(n.v_in + n.v_poured, 300.0, 1e-12);
}

TEST(Sim, HeldTiltDrainsGeometrically) {
  // Explicit relaxation at a fixed tilt: the excess shrinks by (1 - dt/tau)
  // per step.
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  const double e0 = 20.0;
  PourState s = init_state(c, 300.0);
  s.theta = tilt_for_excess(c, 300.0, e0);
  const double keep = 1.0 - cfg.dt / cfg.tau0;
  for (int k = 1; k <= 30; ++k) {
    s = advance(c, LiquidSpec{}, s, 0.0, cfg);
    EXPECT_NEAR(s.v_poured, e0 * (1.0 - std::pow(keep, k)), 1e-3) << k;
  }
}

TEST(Sim, CommandAndTiltAreClamped) {
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  EXPECT_EQ(clamp_command(10.0, cfg), cfg.omega_limit);
  EXPECT_EQ(clamp_command(-10.0, cfg), -cfg.omega_limit);
  PourSimulator sim(c, LiquidSpec{}, cfg, ideal_sensor(), 300.0);
  sim.step(-1.0);
  EXPECT_EQ(sim.state().theta, 0.0);
  sim.step(100.0);
  EXPECT_EQ(sim.last_applied_omega(), cfg.omega_limit);
  EXPECT_NEAR(sim.state().theta, cfg.omega_limit * cfg.dt, 1e-15);
  for (int i = 0; i < 200; ++i) sim.step(1.5);
  EXPECT_EQ(sim.state().theta, std::numbers::pi / 2);
  EXPECT_NEAR(sim.state().v_poured, 300.0, 1e-9);
}

TEST(Sim, ConservationAndMonotonicityUnderRandomCommands) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cmd(-2.0, 2.0);
  for (int run = 0; run < 20; ++run) {
    ContainerSpec c("x", 50.0 + 5.0 * run, 80.0 + 6.0 * run);
    const double total = 0.8 * capacity_upright(c);
    LiquidSpec liq{"l", run % 2 == 0 ? 1.0 : 500.0};
    PourSimulator sim(c, liq, SimConfig{}, SensorModel{}, total);
    double prev = 0.0;
    for (int k = 0; k < 600; ++k) {
      const PourState& s = sim.step(cmd(rng) + 0.3);
      ASSERT_LE(std::abs(s.v_in + s.v_poured - total), 1e-9);
      ASSERT_GE(s.v_poured, prev);
      ASSERT_GE(s.v_in, 0.0);
      prev = s.v_poured;
    }
  }
}

TEST(Sim, IdealSensorReadsTruth) {
  ContainerSpec c("x", 80.0, 100.0);
  PourSimulator sim(c, LiquidSpec{}, SimConfig{}, ideal_sensor(), 400.0);
  for (int k = 0; k < 120; ++k) {
    const PourState& s = sim.step(0.8);
    EXPECT_EQ(s.sensor, s.v_poured);
  }
}

TEST(Sim, DelayedReadingWithImpactTerm) {
  ContainerSpec c("x", 80.0, 100.0);
  SimConfig cfg;
  SensorModel sm = ideal_sensor();
  sm.latency_s = 0.1;
  sm.impact_gain = 0.5;
  PourSimulator sim(c, LiquidSpec{}, cfg, sm, 400.0);
  std::vector<PourState> hist{sim.state()};
  for (int k = 0; k < 150; ++k) hist.push_back(sim.step(0.6));
  const int lag = 6;  // 0.1 s at 60 Hz
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const PourState& then = k >= lag ? hist[k - lag] : hist[0];
    EXPECT_NEAR(hist[k].sensor, then.v_poured + 0.5 * then.q, 1e-12) << k;
  }
}

TEST(Sim, NoiseStatisticsAndDeterminism) {
  ContainerSpec c("x", 80.0, 100.0);
  SensorModel sm = ideal_sensor();
  sm.noise_std = 1.5;
  sm.seed = 42;
  auto readings = [&](std::uint64_t seed) {
    SensorModel m = sm;
    m.seed = seed;
    PourSimulator sim(c, LiquidSpec{}, SimConfig{}, m, 400.0);
    // Pour about half, then stand upright so the true volume is constant.
    while (sim.state().v_poured < 100.0) sim.step(1.0);
    while (sim.state().theta > 0.0 || sim.state().q > 0.0) sim.step(-1.5);
    std::vector<double> out;
    for (int k = 0; k < 40000; ++k) out.push_back(sim.step(0.0).sensor - sim.state().v_poured);
    return out;
  };
  const std::vector<double> a = readings(42);
  EXPECT_EQ(a, readings(42));
  EXPECT_NE(a, readings(43));
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  var /= static_cast<double>(a.size() - 1);
  EXPECT_NEAR(mean, 0.0, 4.0 * 1.5 / std::sqrt(40000.0));
  EXPECT_NEAR(std::sqrt(var), 1.5, 0.03);
}
