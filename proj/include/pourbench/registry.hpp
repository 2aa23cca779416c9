#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pourbench/geometry.hpp"
#include "pourbench/sim.hpp"

namespace pourbench {

struct RegistryEntry {
  ContainerSpec container;
  bool in_training = false;  // used to generate demonstrations
  bool evaluate = true;      // included in container sweeps
};

/// Named containers and liquids, loaded from a human-editable JSON file:
///
///   {"format_version": 1,
///    "containers": [{"name": "red", "d": 70, "h": 107,
///                    "in_training": true, "evaluate": true}, ...],
///    "liquids": [{"name": "water", "viscosity": 1}, ...]}
class ContainerRegistry {
 public:
  ContainerRegistry() = default;
  /// Throws ConfigError on duplicate names or an empty container list.
  ContainerRegistry(std::vector<RegistryEntry> entries, std::vector<LiquidSpec> liquids);

  static ContainerRegistry load(const std::string& path);
  /// Registry file bundled with the sources.
  static std::string default_path();

  const std::vector<RegistryEntry>& entries() const noexcept { return entries_; }
  const std::vector<LiquidSpec>& liquids() const noexcept { return liquids_; }

  std::vector<ContainerSpec> training_containers() const;
  std::vector<RegistryEntry> evaluation_entries() const;

  /// Throws ConfigError naming the missing entry.
  const RegistryEntry& find(const std::string& name) const;
  const LiquidSpec& find_liquid(const std::string& name) const;

 private:
  std::vector<RegistryEntry> entries_;
  std::vector<LiquidSpec> liquids_;
};

}  // namespace pourbench
