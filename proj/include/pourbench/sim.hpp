#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>

#include "pourbench/geometry.hpp"

namespace pourbench {

struct LiquidSpec {
  std::string name = "water";
  double viscosity_cps = 1.0;

  void validate() const;
};

/// Fluctuating poured-volume reading: a delayed sample of the poured volume,
/// an impact term that reads high while liquid is landing, and Gaussian noise.
struct SensorModel {
  double latency_s = 0.1;
  double impact_gain = 0.5;  // mL per (mL/s)
  double noise_std = 1.0;    // mL
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimConfig {
  double dt = 1.0 / 60.0;
  double tau0 = 0.05;        // water outflow time constant, s
  double alpha = 0.25;       // viscosity exponent
  double omega_limit = 1.5;  // rad/s

  void validate() const;
};

struct PourState {
  double t = 0.0;
  double theta = 0.0;
  double v_in = 0.0;
  double v_poured = 0.0;
  double q = 0.0;
  double sensor = 0.0;
};

/// Upright start with `vol_total` mL retained. Throws ConfigError if the
/// volume is not positive or exceeds the container's capacity.
PourState init_state(const ContainerSpec& c, double vol_total);

/// Outflow time constant tau0 * viscosity^alpha.
double outflow_time_constant(const LiquidSpec& liquid, const SimConfig& cfg);

/// Relaxation outflow: the excess of retained volume over the tilted
/// capacity drains with the liquid's time constant.
double outflow_rate(const ContainerSpec& c, const LiquidSpec& liquid,
                    const PourState& state, const SimConfig& cfg);

/// Physics part of a time step: clamps the command, advances the tilt and
/// moves min(v_in, Q dt) from retained to poured, with Q taken at the new
/// tilt. The sensor field is carried over unchanged.
PourState advance(const ContainerSpec& c, const LiquidSpec& liquid,
                  const PourState& state, double omega_cmd,
                  const SimConfig& cfg);

/// Keeps the (v_poured, q) history needed to produce delayed readings.
class VolumeSensor {
 public:
  VolumeSensor(const SensorModel& model, double dt);

  /// Records the state at the newest time step and returns its reading.
  double observe(double v_poured, double q);

  /// Steps between a physical event and its appearance in the reading.
  int lag_steps() const noexcept { return lag_steps_; }

 private:
  struct Sample {
    double v_poured;
    double q;
  };

  SensorModel model_;
  int lag_steps_;
  std::deque<Sample> history_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
};

/// A single pouring run: state, sensor history and RNG. Not thread-safe;
/// independent instances share nothing.
class PourSimulator {
 public:
  PourSimulator(ContainerSpec container, LiquidSpec liquid, SimConfig cfg,
                SensorModel sensor, double vol_total);

  const PourState& state() const noexcept { return state_; }
  const ContainerSpec& container() const noexcept { return container_; }
  const LiquidSpec& liquid() const noexcept { return liquid_; }
  const SimConfig& config() const noexcept { return cfg_; }
  double vol_total() const noexcept { return vol_total_; }

  /// Command actually applied on the last step, after clamping.
  double last_applied_omega() const noexcept { return last_omega_; }

  const PourState& step(double omega_cmd);

 private:
  ContainerSpec container_;
  LiquidSpec liquid_;
  SimConfig cfg_;
  double vol_total_;
  VolumeSensor sensor_;
  PourState state_;
  double last_omega_ = 0.0;
};

/// Clamp a command to the motor velocity limit.
double clamp_command(double omega_cmd, const SimConfig& cfg);

}  // namespace pourbench
