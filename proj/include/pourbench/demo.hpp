#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pourbench/control.hpp"
#include "pourbench/geometry.hpp"
#include "pourbench/sim.hpp"
#include "pourbench/trial.hpp"

namespace pourbench {

struct DemoScenario {
  ContainerSpec container;
  LiquidSpec liquid;
  double vol_total;
  double vol_2pour;
  std::uint64_t style_seed;

  /// Throws ConfigError unless vol_total > vol_2pour > 0 and it fits.
  void validate() const;
};

struct DemoSettings {
  SimConfig sim;
  SensorModel sensor;  // seed is replaced per scenario
  double timeout_s = 30.0;
};

/// Per-demonstrator variation: approach speed, proportional gain and
/// retract speed drawn uniformly from the style seed.
ScriptedPolicyParams sample_style(std::uint64_t style_seed, const DemoSettings& settings);

/// Runs the scripted demonstrator in the simulator and records the trial.
/// Throws GenerationError (naming the scenario) if it does not finish.
Trial generate_demo(const DemoScenario& sc, const DemoSettings& settings);

/// The run configuration generate_demo uses for a scenario, for replays.
RunConfig demo_run_config(const DemoScenario& sc, const DemoSettings& settings);

/// Scenario i of a dataset: container drawn from `containers`,
/// vol_total in [0.3, 0.9] capacity, vol_2pour in [40, vol_total - 20] mL,
/// water only. Depends only on (seed, i).
DemoScenario sample_scenario(std::span<const ContainerSpec> containers, std::uint64_t seed,
                             std::size_t index);

/// `n` demonstrations. Throws ConfigError for an empty container list or n == 0.
std::vector<Trial> generate_dataset(std::size_t n, std::span<const ContainerSpec> containers,
                                    std::uint64_t seed, const DemoSettings& settings);

inline constexpr const char* kGeneratorVersion = "scripted-3phase/1";

}  // namespace pourbench
