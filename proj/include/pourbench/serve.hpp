#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "pourbench/registry.hpp"
#include "pourbench/sim.hpp"

namespace pourbench {

struct ServeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  ContainerRegistry registry;
  std::filesystem::path out_dir = "sessions";
  std::filesystem::path static_dir;  // empty: no UI bundle
  SimConfig sim;
  SensorModel sensor;  // seed is replaced per run
  std::uint64_t seed = 0;
  double timeout_s = 30.0;
};

/// HTTP and WebSocket service for live human pours.
///
///   GET /api/health    service metadata (JSON)
///   WS  /api/session   one simulator per connection
///   GET /...           files from static_dir
///
/// Session messages are JSON objects with a "type" field. From the client:
///   {"type":"start","container":..,"liquid":..,"vol_total":..,"vol_2pour":..}
///   {"type":"velocity","omega":..}   latest value wins; ignored when idle
///   {"type":"end"}
/// From the server, once per simulation step while a run is active:
///   {"type":"state","t":..,"theta":..,"sensor_vol":..,"target_vol":..,
///    "done":false}
/// and one final state with "done":true and "final_error". After each run
/// the server sends {"type":"summary","n":..,"mu_e":..,"sigma_e":..,
/// "errors":[..]} for the connection so far, and writes the trial and the
/// summary under out_dir. Problems are reported as {"type":"error",
/// "message":..}.
class SessionServer {
 public:
  explicit SessionServer(ServeOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds and listens. Returns the bound port. Throws IoError if the
  /// address is unavailable.
  unsigned short listen();
  /// Serves until stop(). Call after listen().
  void run();
  /// Safe from any thread.
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace pourbench
