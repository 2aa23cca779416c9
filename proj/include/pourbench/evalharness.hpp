#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pourbench/control.hpp"
#include "pourbench/registry.hpp"

namespace pourbench {

/// Mean and sample standard deviation of absolute pouring errors, mL.
struct ErrorStats {
  double mu_e = 0.0;
  double sigma_e = 0.0;
  std::size_t n = 0;
};

/// Divisor n-1; a single error has sigma 0. Throws UsageError if empty.
ErrorStats error_stats(std::span<const double> errors);

struct PourRecord {
  double vol_total = 0.0;
  double vol_2pour = 0.0;
  double poured = 0.0;  // true volume
  double error = 0.0;   // |poured - vol_2pour|
  StopReason stop_reason = StopReason::kRetracted;
};

struct ConditionResult {
  std::string condition;  // container or liquid name
  bool in_training = false;
  double viscosity_cps = 1.0;
  ErrorStats stats;
  std::vector<PourRecord> pours;
};

struct SweepConfig {
  std::size_t pours = 15;
  std::uint64_t seed = 0;
  SimConfig sim;
  SensorModel sensor;  // seed is replaced per pour
  double timeout_s = 30.0;
};

enum class SweepKind { kContainers, kViscosity };

struct SweepReport {
  SweepKind kind = SweepKind::kContainers;
  std::string controller;  // name() of the controllers used
  SweepConfig config;
  std::string liquid;     // containers sweep
  std::string container;  // viscosity sweep
  std::vector<ConditionResult> rows;
};

/// Builds a fresh controller for one pour.
using ControllerFactory = std::function<std::unique_ptr<Controller>(const RunConfig&)>;

/// Pour `pours` seeded targets from every evaluated registry container.
/// Targets use the dataset sampling ranges and depend only on (seed,
/// container name, pour index). Rows come back in increasing mu_e.
SweepReport run_container_sweep(const ControllerFactory& make, const ContainerRegistry& registry,
                                const LiquidSpec& liquid, const SweepConfig& cfg);

/// Same targets and sensor seeds for every liquid; only the liquid varies.
/// Rows keep the order of `liquids`.
SweepReport run_viscosity_sweep(const ControllerFactory& make, const RegistryEntry& container,
                                std::span<const LiquidSpec> liquids, const SweepConfig& cfg);

enum class ReportFormat { kJson, kCsv };

/// CSV: condition,in_training,n,mu_e_ml,sigma_e_ml,seed. JSON adds the
/// per-pour errors, the configuration and published physical results for
/// context. Throws UsageError for an empty report, IoError if unwritable.
void emit_report(const SweepReport& report, const std::string& path, ReportFormat format);

std::string report_csv(const SweepReport& report);
std::string report_json(const SweepReport& report);

std::string to_string(SweepKind kind);

}  // namespace pourbench
