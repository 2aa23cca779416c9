#include "pourbench/control.hpp"

#include <algorithm>
#include <cmath>

#include "pourbench/errors.hpp"

namespace pourbench {

namespace {
constexpr double kUprightTol = 0.01;  // rad
}

void RunConfig::validate() const {
  sim.validate();
  sensor.validate();
  liquid.validate();
  if (!(vol_2pour > 0.0 && vol_total > vol_2pour)) {
    throw ConfigError("need vol_total > vol_2pour > 0 (got " + std::to_string(vol_total) +
                      " and " + std::to_string(vol_2pour) + ")");
  }
  if (vol_total > capacity_upright(container)) {
    throw ConfigError("vol_total " + std::to_string(vol_total) + " mL exceeds capacity of '" +
                      container.name() + "'");
  }
  if (!(timeout_s > 0.0)) throw ConfigError("timeout must be > 0");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kRetracted: return "retracted";
    case StopReason::kTimeout: return "timeout";
    case StopReason::kControllerFault: return "controller_fault";
    case StopReason::kEnded: return "ended";
  }
  return "unknown";
}

ClosedLoop::ClosedLoop(const RunConfig& rc)
    : rc_((rc.validate(), rc)),
      sim_(rc.container, rc.liquid, rc.sim, rc.sensor, rc.vol_total) {
  traj_.vol_total = rc.vol_total;
  traj_.vol_2pour = rc.vol_2pour;
  traj_.d = rc.container.diameter();
  traj_.h = rc.container.height();
  traj_.dt = rc.sim.dt;
  traj_.container = rc.container.name();
  traj_.liquid = rc.liquid.name;
  traj_.viscosity = rc.liquid.viscosity_cps;
  max_steps_ = static_cast<long>(std::floor(rc.timeout_s / rc.sim.dt + 1e-9));
}

Observation ClosedLoop::observation() const {
  const PourState& s = sim_.state();
  Observation obs{s.t, s.theta, s.sensor, rc_.vol_total, rc_.vol_2pour,
                  rc_.container.diameter(), rc_.container.height()};
  if (rc_.expose_stream) obs.stream_flow = s.q;
  return obs;
}

void ClosedLoop::record(const PourState& s, double omega) {
  traj_.theta.push_back(s.theta);
  traj_.vol.push_back(s.sensor);
  traj_.omega.push_back(omega);
}

bool ClosedLoop::step(double omega) {
  if (finished_ || closed_ || timed_out()) throw UsageError("step after the run is over");
  const PourState before = sim_.state();
  sim_.step(omega);
  record(before, sim_.last_applied_omega());
  ++steps_;
  const PourState& now = sim_.state();
  if (now.v_poured > 0.0) started_ = true;
  finished_ = started_ && now.theta <= kUprightTol && now.q == 0.0;
  return finished_;
}

RunResult ClosedLoop::result(StopReason reason) {
  if (closed_) throw UsageError("run result already taken");
  closed_ = true;
  // A run stopped before its first step still yields a two-sample trial;
  // holding at the start changes nothing.
  if (traj_.theta.empty()) record(sim_.state(), 0.0);
  // Terminal sample; its command is never applied.
  record(sim_.state(), 0.0);
  RunResult r;
  r.stop_reason = reason;
  r.final_poured = sim_.state().v_poured;
  r.final_error = std::abs(r.final_poured - rc_.vol_2pour);
  r.overpoured = r.final_poured > rc_.vol_2pour;
  r.trajectory = std::move(traj_);
  return r;
}

RunResult run_closed_loop(Controller& controller, const RunConfig& rc) {
  ClosedLoop loop(rc);
  controller.reset({rc.container, rc.vol_total, rc.vol_2pour, rc.sim.dt, rc.sim.omega_limit});
  while (!loop.timed_out()) {
    const double omega = controller.step(loop.observation());
    // Non-finite commands end the run without being applied.
    if (!std::isfinite(omega)) return loop.result(StopReason::kControllerFault);
    if (loop.step(omega)) return loop.result(StopReason::kRetracted);
  }
  return loop.result(StopReason::kTimeout);
}

double replay_trial(const Trial& trial, const RunConfig& rc, double* theta_mismatch) {
  PourSimulator sim(rc.container, rc.liquid, rc.sim, rc.sensor, trial.vol_total);
  double worst = trial.theta.empty() ? 0.0 : std::abs(trial.theta[0] - sim.state().theta);
  for (std::size_t k = 0; k + 1 < trial.size(); ++k) {
    sim.step(trial.omega[k]);
    worst = std::max(worst, std::abs(trial.theta[k + 1] - sim.state().theta));
  }
  if (theta_mismatch != nullptr) *theta_mismatch = worst;
  return sim.state().v_poured;
}

ScriptedPolicyParams ScriptedPolicyParams::matched_to(const SensorModel& sensor) {
  ScriptedPolicyParams p;
  p.latency_s = sensor.latency_s;
  p.impact_gain = sensor.impact_gain;
  return p;
}

ScriptedPourController::ScriptedPourController(ScriptedPolicyParams params)
    : params_(params) {}

void ScriptedPourController::reset(const TaskInfo& task) {
  spill_angle_ = critical_angle(task.container, task.vol_total);
  vol_2pour_ = task.vol_2pour;
  dt_ = task.dt;
  lag_ = static_cast<std::size_t>(std::lround(params_.latency_s / dt_));
  window_ = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(params_.flow_window_s / dt_)));
  readings_.clear();
  flows_.clear();
  predicted_ = 0.0;
  retract_steps_ = 0;
  phase_ = Phase::kApproach;
}

double ScriptedPourController::predict(const Observation& obs) {
  readings_.push_back(obs.sensor);
  if (readings_.size() > window_) readings_.pop_front();

  if (std::isfinite(obs.stream_flow)) {
    flows_.push_back(obs.stream_flow);
    if (flows_.size() > lag_ + 1) flows_.pop_front();
    const double q_then = flows_.size() == lag_ + 1 ? flows_.front() : 0.0;
    return obs.sensor - params_.impact_gain * q_then + params_.latency_s * obs.stream_flow;
  }

  // Least-squares line through the window; level and slope at the newest
  // sample.
  const auto n = static_cast<double>(readings_.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < readings_.size(); ++i) {
    const double t = static_cast<double>(i) * dt_;
    st += t;
    sy += readings_[i];
    stt += t * t;
    sty += t * readings_[i];
  }
  const double den = n * stt - st * st;
  const double slope = den > 0.0 ? (n * sty - st * sy) / den : 0.0;
  const double level = (sy + slope * ((n - 1.0) * dt_ * n - st)) / n;
  const double flow = std::max(0.0, slope);
  return level + (params_.latency_s - params_.impact_gain) * flow;
}

double ScriptedPourController::step(const Observation& obs) {
  predicted_ = predict(obs);

  switch (phase_) {
    case Phase::kApproach:
      if (obs.theta < spill_angle_ - params_.approach_margin) return params_.omega_fast;
      phase_ = Phase::kPour;
      [[fallthrough]];
    case Phase::kPour:
      if (predicted_ < vol_2pour_) {
        const double cmd = params_.k_p * (vol_2pour_ - predicted_) / vol_2pour_;
        return std::clamp(cmd, params_.omega_min, params_.omega_mid);
      }
      phase_ = Phase::kRetract;
      [[fallthrough]];
    case Phase::kRetract:
      if (obs.theta > 0.0) {
        ++retract_steps_;
        const double ramped = params_.retract_ramp * static_cast<double>(retract_steps_) * dt_;
        return -std::min(params_.omega_back, ramped);
      }
      phase_ = Phase::kDone;
      [[fallthrough]];
    case Phase::kDone:
      break;
  }
  return 0.0;
}

std::unique_ptr<Controller> baseline_controller(const RunConfig& rc) {
  return std::make_unique<ScriptedPourController>(ScriptedPolicyParams::matched_to(rc.sensor));
}

LstmController::LstmController(ModelCheckpoint cp) : cp_(std::move(cp)) {
  if (cp_.params.input_dim() != static_cast<int>(kNumFeatures)) {
    throw ConfigError("checkpoint expects " + std::to_string(cp_.params.input_dim()) +
                      " inputs, controller provides " + std::to_string(kNumFeatures));
  }
  state_ = LstmState::zeros(cp_.params.hidden());
}

void LstmController::reset(const TaskInfo& task) {
  state_ = LstmState::zeros(cp_.params.hidden());
  omega_limit_ = task.omega_limit;
}

double LstmController::step(const Observation& obs) {
  const FeatureVector z = cp_.norm.normalize(obs.features());
  LstmStepResult r = lstm_step(cp_.params, state_, z);
  state_ = std::move(r.state);
  if (!std::isfinite(r.omega)) return r.omega;
  return std::clamp(r.omega, -omega_limit_, omega_limit_);
}

std::unique_ptr<Controller> lstm_controller(const ModelCheckpoint& cp) {
  return std::make_unique<LstmController>(cp);
}

}  // namespace pourbench
