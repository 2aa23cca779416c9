#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pourbench/geometry.hpp"
#include "pourbench/lstm.hpp"
#include "pourbench/sim.hpp"
#include "pourbench/training.hpp"
#include "pourbench/trial.hpp"

namespace pourbench {

struct RunConfig {
  ContainerSpec container{"red", 70.0, 107.0};
  LiquidSpec liquid;
  double vol_total = 300.0;
  double vol_2pour = 150.0;
  SimConfig sim;
  SensorModel sensor;
  double timeout_s = 30.0;
  /// Lets the controller watch the stream (Observation::stream_flow). Used
  /// for scripted demonstrations only.
  bool expose_stream = false;

  /// Throws ConfigError unless vol_total > vol_2pour > 0, vol_total fits the
  /// container and the nested configs are valid.
  void validate() const;
};

/// What a controller may see at one step. There is deliberately no field for
/// the true poured volume: only the sensor reading.
struct Observation {
  double t = 0.0;
  double theta = 0.0;
  double sensor = 0.0;
  double vol_total = 0.0;
  double vol_2pour = 0.0;
  double diameter = 0.0;
  double height = 0.0;
  /// Current outflow, mL/s. Only set for runs that expose the stream to a
  /// demonstrator (RunConfig::expose_stream); NaN otherwise.
  double stream_flow = std::numeric_limits<double>::quiet_NaN();

  FeatureVector features() const {
    return {vol_total, vol_2pour, diameter, height, theta, sensor};
  }
};

/// Static facts a controller learns at the start of a run.
struct TaskInfo {
  ContainerSpec container;
  double vol_total;
  double vol_2pour;
  double dt;
  double omega_limit;
};

class Controller {
 public:
  virtual ~Controller() = default;
  /// Clears per-run state.
  virtual void reset(const TaskInfo& task) = 0;
  /// Angular velocity command for this step, rad/s.
  virtual double step(const Observation& obs) = 0;
  virtual std::string name() const = 0;
};

enum class StopReason { kRetracted, kTimeout, kControllerFault, kEnded };

std::string to_string(StopReason r);

struct RunResult {
  double final_error = 0.0;  // |true poured - vol_2pour|, mL
  double final_poured = 0.0;
  bool overpoured = false;
  StopReason stop_reason = StopReason::kTimeout;
  Trial trajectory;
};

/// One pour driven a command at a time. Records the trajectory as a Trial
/// and applies the stopping rule: the run is over once pouring has started
/// and the cup is back upright with no flow.
class ClosedLoop {
 public:
  /// Throws ConfigError for an invalid configuration.
  explicit ClosedLoop(const RunConfig& rc);

  /// What a controller may see now.
  Observation observation() const;
  /// Applies one command for dt. Returns true once the run has finished.
  /// Throws UsageError after the run is over.
  bool step(double omega);

  bool finished() const noexcept { return finished_; }
  bool timed_out() const noexcept { return steps_ >= max_steps_; }
  long steps() const noexcept { return steps_; }
  long max_steps() const noexcept { return max_steps_; }
  const PourState& state() const noexcept { return sim_.state(); }
  const RunConfig& config() const noexcept { return rc_; }

  /// Closes the trajectory with a terminal sample and scores the pour.
  RunResult result(StopReason reason);

 private:
  void record(const PourState& s, double omega);

  RunConfig rc_;
  PourSimulator sim_;
  Trial traj_;
  long steps_ = 0;
  long max_steps_ = 0;
  bool started_ = false;
  bool finished_ = false;
  bool closed_ = false;
};

/// Steps the simulator at dt with the controller in the loop until the cup is
/// back upright with no flow after pouring started, or until the timeout.
/// A non-finite command aborts the run with kControllerFault.
RunResult run_closed_loop(Controller& controller, const RunConfig& rc);

/// Re-simulates the recorded commands of `trial` from the initial state and
/// returns the final true poured volume. Angles are checked against the
/// recording when `theta_mismatch` is non-null (max abs difference, rad).
double replay_trial(const Trial& trial, const RunConfig& rc,
                    double* theta_mismatch = nullptr);

/// Tuning of the three-phase scripted pouring policy.
struct ScriptedPolicyParams {
  double omega_fast = 0.6;   // approach speed, rad/s
  double k_p = 1.0;          // pour-phase proportional gain, rad/s
  double omega_back = 0.75;  // retract speed, rad/s
  double retract_ramp = 3.0;  // rad/s^2 from zero up to omega_back
  double omega_min = 0.015;  // pour-phase floor, rad/s
  double omega_mid = 0.12;   // pour-phase ceiling, rad/s
  double approach_margin = 0.05;  // rad before the spill angle
  // Sensor model assumed when predicting the poured volume from the reading.
  double latency_s = 0.1;
  double impact_gain = 0.5;
  // Span of readings fitted to estimate the flow when the stream is not
  // visible, s.
  double flow_window_s = 0.25;

  /// Latency and impact gain taken from a sensor model.
  static ScriptedPolicyParams matched_to(const SensorModel& sensor);
};

/// Approach fast to just below the spill angle, pour with a proportional law
/// on the remaining volume, retract once the predicted poured volume reaches
/// the target.
///
/// The prediction undoes the impact term and adds the liquid still in
/// flight over the sensor delay. It needs the flow: a demonstrator reads it
/// off the stream (Observation::stream_flow), otherwise it is the slope of a
/// least-squares line through the recent readings.
class ScriptedPourController final : public Controller {
 public:
  explicit ScriptedPourController(ScriptedPolicyParams params);

  void reset(const TaskInfo& task) override;
  double step(const Observation& obs) override;
  std::string name() const override { return "scripted"; }

  enum class Phase { kApproach, kPour, kRetract, kDone };
  Phase phase() const noexcept { return phase_; }
  const ScriptedPolicyParams& params() const noexcept { return params_; }
  /// Latest prediction of the poured volume, mL.
  double predicted_volume() const noexcept { return predicted_; }

 private:
  double predict(const Observation& obs);

  ScriptedPolicyParams params_;
  double spill_angle_ = 0.0;
  double vol_2pour_ = 0.0;
  double dt_ = 1.0 / 60.0;
  std::size_t lag_ = 0;
  std::size_t window_ = 2;
  std::deque<double> readings_;
  std::deque<double> flows_;
  double predicted_ = 0.0;
  long retract_steps_ = 0;
  Phase phase_ = Phase::kApproach;
};

/// Fixed mid-range parameters of the scripted policy for the run's sensor
/// model. It sees only the reading.
std::unique_ptr<Controller> baseline_controller(const RunConfig& rc);

/// Peephole-LSTM velocity generator driven by normalized observations.
class LstmController final : public Controller {
 public:
  /// Throws ConfigError unless the checkpoint consumes the six features.
  explicit LstmController(ModelCheckpoint cp);

  void reset(const TaskInfo& task) override;
  double step(const Observation& obs) override;
  std::string name() const override { return "lstm"; }

 private:
  ModelCheckpoint cp_;
  LstmState state_;
  double omega_limit_ = 0.0;
};

std::unique_ptr<Controller> lstm_controller(const ModelCheckpoint& cp);

}  // namespace pourbench
