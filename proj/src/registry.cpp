#include "pourbench/registry.hpp"

#include <set>

#include "pourbench/errors.hpp"
#include "pourbench/json_io.hpp"

#ifndef POURBENCH_DEFAULT_REGISTRY
#define POURBENCH_DEFAULT_REGISTRY "config/containers.json"
#endif

namespace pourbench {

ContainerRegistry::ContainerRegistry(std::vector<RegistryEntry> entries,
                                     std::vector<LiquidSpec> liquids)
    : entries_(std::move(entries)), liquids_(std::move(liquids)) {
  if (entries_.empty()) throw ConfigError("container registry is empty");
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.container.name()).second) {
      throw ConfigError("duplicate container name '" + e.container.name() + "'");
    }
  }
  seen.clear();
  for (const auto& l : liquids_) {
    l.validate();
    if (!seen.insert(l.name).second) {
      throw ConfigError("duplicate liquid name '" + l.name + "'");
    }
  }
}

ContainerRegistry ContainerRegistry::load(const std::string& path) {
  const nlohmann::json doc = read_json_file(path);
  try {
    std::vector<RegistryEntry> entries;
    for (const auto& c : doc.at("containers")) {
      entries.push_back({ContainerSpec(c.at("name").get<std::string>(), c.at("d").get<double>(),
                                       c.at("h").get<double>()),
                         c.value("in_training", false), c.value("evaluate", true)});
    }
    std::vector<LiquidSpec> liquids;
    if (doc.contains("liquids")) {
      for (const auto& l : doc.at("liquids")) {
        liquids.push_back({l.at("name").get<std::string>(), l.at("viscosity").get<double>()});
      }
    }
    return ContainerRegistry(std::move(entries), std::move(liquids));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid registry (" + e.what() + ")");
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string ContainerRegistry::default_path() { return POURBENCH_DEFAULT_REGISTRY; }

std::vector<ContainerSpec> ContainerRegistry::training_containers() const {
  std::vector<ContainerSpec> out;
  for (const auto& e : entries_) {
    if (e.in_training) out.push_back(e.container);
  }
  return out;
}

std::vector<RegistryEntry> ContainerRegistry::evaluation_entries() const {
  std::vector<RegistryEntry> out;
  for (const auto& e : entries_) {
    if (e.evaluate) out.push_back(e);
  }
  return out;
}

const RegistryEntry& ContainerRegistry::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.container.name() == name) return e;
  }
  throw ConfigError("unknown container '" + name + "'");
}

const LiquidSpec& ContainerRegistry::find_liquid(const std::string& name) const {
  for (const auto& l : liquids_) {
    if (l.name == name) return l;
  }
  throw ConfigError("unknown liquid '" + name + "'");
}

}  // namespace pourbench
