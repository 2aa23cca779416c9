#include "pourbench/demo.hpp"

#include <algorithm>
#include <random>

#include "pourbench/errors.hpp"
#include "pourbench/seeding.hpp"

namespace pourbench {

namespace {
constexpr double kMinPour = 40.0;     // mL
constexpr double kMinLeftover = 20.0;  // mL kept in the source container
constexpr double kFillLo = 0.3;
constexpr double kFillHi = 0.9;
}  // namespace

void DemoScenario::validate() const {
  liquid.validate();
  if (!(vol_2pour > 0.0 && vol_total > vol_2pour)) {
    throw ConfigError("scenario needs vol_total > vol_2pour > 0");
  }
  if (vol_total > capacity_upright(container)) {
    throw ConfigError("scenario vol_total exceeds capacity of '" + container.name() + "'");
  }
}

ScriptedPolicyParams sample_style(std::uint64_t style_seed, const DemoSettings& settings) {
  std::mt19937_64 rng(derive_seed(style_seed, {stable_hash("style")}));
  std::uniform_real_distribution<double> fast(0.4, 0.8);
  std::uniform_real_distribution<double> gain(0.5, 1.5);
  std::uniform_real_distribution<double> back(0.5, 1.0);
  ScriptedPolicyParams p = ScriptedPolicyParams::matched_to(settings.sensor);
  p.omega_fast = fast(rng);
  p.k_p = gain(rng);
  p.omega_back = back(rng);
  return p;
}

RunConfig demo_run_config(const DemoScenario& sc, const DemoSettings& settings) {
  RunConfig rc;
  rc.container = sc.container;
  rc.liquid = sc.liquid;
  rc.vol_total = sc.vol_total;
  rc.vol_2pour = sc.vol_2pour;
  rc.sim = settings.sim;
  rc.sensor = settings.sensor;
  rc.sensor.seed = derive_seed(sc.style_seed, {stable_hash("sensor")});
  rc.timeout_s = settings.timeout_s;
  rc.expose_stream = true;
  return rc;
}

Trial generate_demo(const DemoScenario& sc, const DemoSettings& settings) {
  sc.validate();
  ScriptedPourController demonstrator(sample_style(sc.style_seed, settings));
  RunResult r = run_closed_loop(demonstrator, demo_run_config(sc, settings));
  if (r.stop_reason != StopReason::kRetracted) {
    throw GenerationError("demonstrator did not finish (" + to_string(r.stop_reason) +
                          ") for container '" + sc.container.name() +
                          "', vol_total=" + std::to_string(sc.vol_total) +
                          ", vol_2pour=" + std::to_string(sc.vol_2pour));
  }
  return std::move(r.trajectory);
}

DemoScenario sample_scenario(std::span<const ContainerSpec> containers, std::uint64_t seed,
                             std::size_t index) {
  if (containers.empty()) throw ConfigError("no training containers to sample from");
  std::mt19937_64 rng(derive_seed(seed, {stable_hash("scenario"), index}));
  std::uniform_int_distribution<std::size_t> pick(0, containers.size() - 1);
  const ContainerSpec& c = containers[pick(rng)];
  const double cap = capacity_upright(c);
  const double lo = std::max(kFillLo * cap, kMinPour + kMinLeftover);
  const double hi = kFillHi * cap;
  if (hi < lo) {
    throw ConfigError("container '" + c.name() + "' is too small for the sampling ranges");
  }
  const double vol_total = std::uniform_real_distribution<double>(lo, hi)(rng);
  const double vol_2pour =
      std::uniform_real_distribution<double>(kMinPour, vol_total - kMinLeftover)(rng);
  return {c, LiquidSpec{}, vol_total, vol_2pour, rng()};
}

std::vector<Trial> generate_dataset(std::size_t n, std::span<const ContainerSpec> containers,
                                    std::uint64_t seed, const DemoSettings& settings) {
  if (n == 0) throw ConfigError("dataset size must be >= 1");
  if (containers.empty()) throw ConfigError("registry has no training containers");
  std::vector<Trial> trials;
  trials.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    trials.push_back(generate_demo(sample_scenario(containers, seed, i), settings));
  }
  return trials;
}

}  // namespace pourbench
