#pragma once

// JSON conversions shared by the file formats. Kept out of the domain
// headers so only translation units that serialize pay for json.hpp.

#include <array>
#include <string>

#include "json.hpp"
#include "pourbench/sim.hpp"
#include "pourbench/trial.hpp"

namespace pourbench {

inline constexpr int kFormatVersion = 1;

nlohmann::json trial_to_json(const Trial& trial);

/// Throws ParseError for missing/mistyped fields and ValidationError for
/// invariant violations; `line` is attached to either.
Trial trial_from_json(const nlohmann::json& j, std::size_t line = 0);

nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const SensorModel& sm);
nlohmann::json to_json(const LiquidSpec& liquid);

/// Overlay present keys of `j` onto `cfg`.
void merge_json(const nlohmann::json& j, SimConfig& cfg);
void merge_json(const nlohmann::json& j, SensorModel& sm);

/// Reads a whole JSON document; ParseError carries the byte offset.
nlohmann::json read_json_file(const std::string& path);

/// Writes `j` with two-space indent and a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace pourbench
