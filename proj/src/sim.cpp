#include "pourbench/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pourbench/errors.hpp"

namespace pourbench {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
}

void LiquidSpec::validate() const {
  if (!(viscosity_cps >= 1.0) || !std::isfinite(viscosity_cps)) {
    throw ConfigError("liquid '" + name + "': viscosity must be >= 1 cps");
  }
}

void SensorModel::validate() const {
  if (!(latency_s >= 0.0) || !std::isfinite(latency_s)) {
    throw ConfigError("sensor latency must be >= 0");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ConfigError("sensor noise_std must be >= 0");
  }
  if (!std::isfinite(impact_gain)) {
    throw ConfigError("sensor impact_gain must be finite");
  }
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) {
    throw ConfigError("tau0 must be > 0");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be >= 0");
  }
  if (!(omega_limit > 0.0) || !std::isfinite(omega_limit)) {
    throw ConfigError("omega_limit must be > 0");
  }
}

PourState init_state(const ContainerSpec& c, double vol_total) {
  const double cap = capacity_upright(c);
  if (!(vol_total > 0.0) || vol_total > cap) {
    throw ConfigError("vol_total " + std::to_string(vol_total) +
                      " mL does not fit container '" + c.name() +
                      "' (capacity " + std::to_string(cap) + " mL)");
  }
  PourState s;
  s.v_in = vol_total;
  return s;
}

double outflow_time_constant(const LiquidSpec& liquid, const SimConfig& cfg) {
  return cfg.tau0 * std::pow(liquid.viscosity_cps, cfg.alpha);
}

double outflow_rate(const ContainerSpec& c, const LiquidSpec& liquid,
                    const PourState& state, const SimConfig& cfg) {
  const double excess = state.v_in - tilted_capacity(c, state.theta);
  if (!(excess > 0.0)) return 0.0;
  return excess / outflow_time_constant(liquid, cfg);
}

double clamp_command(double omega_cmd, const SimConfig& cfg) {
  return std::clamp(omega_cmd, -cfg.omega_limit, cfg.omega_limit);
}

PourState advance(const ContainerSpec& c, const LiquidSpec& liquid,
                  const PourState& state, double omega_cmd,
                  const SimConfig& cfg) {
  const double vol_total = state.v_in + state.v_poured;
  const double omega = clamp_command(omega_cmd, cfg);

  PourState next = state;
  next.theta = std::clamp(state.theta + omega * cfg.dt, 0.0, kHalfPi);
  next.q = outflow_rate(c, liquid, next, cfg);
  const double moved = std::min(state.v_in, next.q * cfg.dt);
  if (moved >= state.v_in) {
    next.v_poured = vol_total;
    next.v_in = 0.0;
  } else {
    next.v_poured = state.v_poured + moved;
    next.v_in = state.v_in - moved;
  }
  next.t = state.t + cfg.dt;
  return next;
}

VolumeSensor::VolumeSensor(const SensorModel& model, double dt)
    : model_(model),
      lag_steps_(static_cast<int>(std::lround(model.latency_s / dt))),
      rng_(model.seed),
      noise_(0.0, 1.0) {
  model_.validate();
}

double VolumeSensor::observe(double v_poured, double q) {
  history_.push_back({v_poured, q});
  while (history_.size() > static_cast<std::size_t>(lag_steps_) + 1) {
    history_.pop_front();
  }
  // Until the history covers the latency window the delayed sample is the
  // initial, empty state.
  Sample delayed{0.0, 0.0};
  if (history_.size() == static_cast<std::size_t>(lag_steps_) + 1) {
    delayed = history_.front();
  }
  // Always draw, so the noise stream does not depend on noise_std.
  const double eta = model_.noise_std * noise_(rng_);
  return std::max(0.0, delayed.v_poured + model_.impact_gain * delayed.q + eta);
}

PourSimulator::PourSimulator(ContainerSpec container, LiquidSpec liquid,
                             SimConfig cfg, SensorModel sensor,
                             double vol_total)
    : container_(std::move(container)),
      liquid_(std::move(liquid)),
      cfg_(cfg),
      vol_total_(vol_total),
      sensor_((cfg.validate(), sensor), cfg.dt),
      state_(init_state(container_, vol_total)) {
  liquid_.validate();
  // The t = 0 state is the first history entry.
  sensor_.observe(0.0, 0.0);
  state_.sensor = 0.0;
}

const PourState& PourSimulator::step(double omega_cmd) {
  last_omega_ = clamp_command(omega_cmd, cfg_);
  PourState next = advance(container_, liquid_, state_, last_omega_, cfg_);
  // Re-derive retained volume from the fixed total so the bookkeeping
  // identity holds at every step regardless of rounding history.
  next.v_in = next.v_poured >= vol_total_ ? 0.0 : vol_total_ - next.v_poured;
  next.sensor = sensor_.observe(next.v_poured, next.q);
  state_ = next;
  return state_;
}

}  // namespace pourbench
