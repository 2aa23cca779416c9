#include "cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pourbench/control.hpp"
#include "pourbench/demo.hpp"
#include "pourbench/errors.hpp"
#include "pourbench/evalharness.hpp"
#include "pourbench/json_io.hpp"
#include "pourbench/lstm.hpp"
#include "pourbench/registry.hpp"
#include "pourbench/serve.hpp"
#include "pourbench/training.hpp"

namespace pourbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out_dir;
  bool quiet = false;
};

/// Settings shared by every subcommand that runs the simulator.
struct Physics {
  SimConfig sim;
  SensorModel sensor;
  double timeout_s = 30.0;
};

json load_config(const Globals& g) {
  std::string path = g.config;
  if (path.empty()) {
    if (const char* env = std::getenv("POURBENCH_CONFIG"); env != nullptr) path = env;
  }
  if (path.empty()) return json::object();
  json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  return j;
}

json section(const json& cfg, const char* name) {
  if (!cfg.contains(name)) return json::object();
  const json& s = cfg.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  return s;
}

/// Takes `key` from the config unless the flag was given on the command line.
template <class T>
void overlay(const CLI::Option* flag, const json& cfg, const char* key, T& value) {
  if (flag != nullptr && flag->count() > 0) return;
  if (!cfg.contains(key)) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

Physics load_physics(const json& cfg) {
  Physics p;
  merge_json(section(cfg, "sim"), p.sim);
  merge_json(section(cfg, "sensor"), p.sensor);
  overlay<double>(nullptr, cfg, "timeout_s", p.timeout_s);
  p.sim.validate();
  p.sensor.validate();
  return p;
}

fs::path output_path(const Globals& g, const std::string& path) {
  fs::path p(path);
  if (!g.out_dir.empty() && p.is_relative()) p = fs::path(g.out_dir) / p;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

ContainerRegistry load_registry(const std::string& path) {
  return ContainerRegistry::load(path.empty() ? ContainerRegistry::default_path() : path);
}

// ---------------------------------------------------------------- gen-data

struct GenData {
  std::size_t n = 284;
  std::string registry;
  std::string out = "trials.jsonl";
  CLI::Option* n_opt = nullptr;
  CLI::Option* registry_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

int gen_data(const Globals& g, GenData& a, const json& cfg) {
  const json s = section(cfg, "gen_data");
  overlay(a.n_opt, s, "n", a.n);
  overlay(a.registry_opt, cfg, "registry", a.registry);
  overlay(a.out_opt, s, "out", a.out);
  const Physics phys = load_physics(cfg);

  const ContainerRegistry reg = load_registry(a.registry);
  const std::vector<ContainerSpec> containers = reg.training_containers();
  DemoSettings settings{phys.sim, phys.sensor, phys.timeout_s};
  const std::vector<Trial> trials = generate_dataset(a.n, containers, g.seed, settings);

  const fs::path out = output_path(g, a.out);
  save_trials(out, trials);

  json names = json::array();
  for (const ContainerSpec& c : containers) names.push_back(c.name());
  fs::path manifest = out;
  manifest.replace_extension(".manifest.json");
  write_json_file(manifest.string(), {{"format_version", kFormatVersion},
                                      {"count", trials.size()},
                                      {"seed", g.seed},
                                      {"containers", names},
                                      {"generator_version", kGeneratorVersion},
                                      {"sim", to_json(phys.sim)},
                                      {"sensor", to_json(phys.sensor)}});
  if (!g.quiet) std::cout << "wrote " << trials.size() << " trials to " << out.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct Train {
  std::string data;
  std::string out = "model.json";
  TrainHyper hyper;
  std::vector<CLI::Option*> opts;
};

int train_cmd(const Globals& g, Train& a, const json& cfg) {
  const json s = section(cfg, "train");
  overlay(a.opts[0], s, "data", a.data);
  overlay(a.opts[1], s, "out", a.out);
  overlay(a.opts[2], s, "epochs", a.hyper.epochs);
  overlay(a.opts[3], s, "lr", a.hyper.lr);
  overlay(a.opts[4], s, "batch", a.hyper.batch);
  overlay(a.opts[5], s, "clip_norm", a.hyper.clip_norm);
  overlay(a.opts[6], s, "val_frac", a.hyper.val_frac);
  overlay(a.opts[7], s, "hidden", a.hyper.hidden);
  overlay(a.opts[8], s, "threads", a.hyper.threads);
  if (a.data.empty()) throw UsageError("train needs --data <trials.jsonl>");
  if (a.hyper.epochs < 0) throw UsageError("--epochs must be >= 0");
  if (a.hyper.batch < 1) throw UsageError("--batch must be >= 1");
  if (!(a.hyper.lr > 0.0)) throw UsageError("--lr must be > 0");
  if (!(a.hyper.val_frac > 0.0 && a.hyper.val_frac < 1.0)) {
    throw UsageError("--val-frac must be in (0, 1)");
  }
  a.hyper.seed = g.seed;

  if (!fs::exists(a.data)) throw IoError("data file not found: " + a.data);
  const std::vector<Trial> trials = load_trials(a.data);
  if (!g.quiet) std::cout << "epoch,train_mse,val_mse\n";
  const ModelCheckpoint cp = train(trials, a.hyper, [&](const EpochRecord& r) {
    if (g.quiet) return;
    char line[96];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", r.epoch, r.train_mse, r.val_mse);
    std::cout << line << std::flush;
  });
  const fs::path out = output_path(g, a.out);
  save_checkpoint(cp, out.string());
  if (!g.quiet) {
    std::cout << "best epoch " << cp.metadata.best_epoch << ", checkpoint " << out.string()
              << "\n";
  }
  return 0;
}

// -------------------------------------------------------------------- eval

struct Eval {
  std::string model;
  bool baseline = false;
  std::string sweep = "containers";
  std::string registry;
  std::size_t pours = 15;
  std::string liquid = "water";
  std::string container = "red";
  std::vector<std::string> liquids;
  std::string out = "report";
  double noise_std = -1.0;
  std::vector<CLI::Option*> opts;
};

ControllerFactory make_factory(const std::string& model, bool baseline, std::string& name) {
  if (baseline) {
    name = "baseline";
    return [](const RunConfig& rc) { return baseline_controller(rc); };
  }
  if (model.empty()) throw UsageError("give --model <model.json> or --baseline");
  auto cp = std::make_shared<const ModelCheckpoint>(load_checkpoint(model));
  name = "lstm";
  return [cp](const RunConfig&) { return lstm_controller(*cp); };
}

int eval_cmd(const Globals& g, Eval& a, const json& cfg) {
  const json s = section(cfg, "eval");
  overlay(a.opts[0], s, "model", a.model);
  overlay(a.opts[1], s, "sweep", a.sweep);
  overlay(a.opts[2], cfg, "registry", a.registry);
  overlay(a.opts[3], s, "pours", a.pours);
  overlay(a.opts[4], s, "liquid", a.liquid);
  overlay(a.opts[5], s, "container", a.container);
  overlay(a.opts[6], s, "liquids", a.liquids);
  overlay(a.opts[7], s, "out", a.out);
  Physics phys = load_physics(cfg);
  if (a.noise_std >= 0.0) phys.sensor.noise_std = a.noise_std;

  const ContainerRegistry reg = load_registry(a.registry);
  std::string name;
  const ControllerFactory factory = make_factory(a.model, a.baseline, name);
  SweepConfig sc{a.pours, g.seed, phys.sim, phys.sensor, phys.timeout_s};

  SweepReport report;
  if (a.sweep == "containers") {
    report = run_container_sweep(factory, reg, reg.find_liquid(a.liquid), sc);
  } else if (a.sweep == "viscosity") {
    std::vector<LiquidSpec> liquids;
    if (a.liquids.empty()) {
      liquids = reg.liquids();
    } else {
      for (const std::string& l : a.liquids) liquids.push_back(reg.find_liquid(l));
    }
    report = run_viscosity_sweep(factory, reg.find(a.container), liquids, sc);
  } else {
    throw UsageError("--sweep must be 'containers' or 'viscosity'");
  }
  report.controller = name;

  fs::path out = output_path(g, a.out);
  const std::string ext = out.extension().string();
  if (ext == ".json") {
    emit_report(report, out.string(), ReportFormat::kJson);
  } else if (ext == ".csv") {
    emit_report(report, out.string(), ReportFormat::kCsv);
  } else {
    emit_report(report, out.string() + ".json", ReportFormat::kJson);
    emit_report(report, out.string() + ".csv", ReportFormat::kCsv);
  }
  if (!g.quiet) std::cout << report_csv(report);
  return 0;
}

// ---------------------------------------------------------------- simulate

struct Simulate {
  std::string model;
  bool baseline = false;
  double vol_total = 300.0;
  double vol_2pour = 150.0;
  std::string container = "red";
  std::string liquid = "water";
  std::string registry;
  std::string trace;
  std::string trial;
  double noise_std = -1.0;
  std::vector<CLI::Option*> opts;
};

int simulate_cmd(const Globals& g, Simulate& a, const json& cfg) {
  const json s = section(cfg, "simulate");
  overlay(a.opts[0], s, "model", a.model);
  overlay(a.opts[1], s, "vol_total", a.vol_total);
  overlay(a.opts[2], s, "vol_2pour", a.vol_2pour);
  overlay(a.opts[3], s, "container", a.container);
  overlay(a.opts[4], s, "liquid", a.liquid);
  overlay(a.opts[5], cfg, "registry", a.registry);
  Physics phys = load_physics(cfg);
  if (a.noise_std >= 0.0) phys.sensor.noise_std = a.noise_std;

  const ContainerRegistry reg = load_registry(a.registry);
  RunConfig rc;
  rc.container = reg.find(a.container).container;
  rc.liquid = reg.find_liquid(a.liquid);
  rc.vol_total = a.vol_total;
  rc.vol_2pour = a.vol_2pour;
  rc.sim = phys.sim;
  rc.sensor = phys.sensor;
  rc.sensor.seed = g.seed;
  rc.timeout_s = phys.timeout_s;
  rc.validate();

  std::string name;
  const ControllerFactory factory = make_factory(a.model, a.baseline, name);
  std::unique_ptr<Controller> controller = factory(rc);

  std::ofstream trace;
  if (!a.trace.empty()) {
    const fs::path p = output_path(g, a.trace);
    trace.open(p, std::ios::binary | std::ios::trunc);
    if (!trace) throw IoError("cannot write trace " + p.string());
  }
  const auto dump = [&trace](const PourState& st, double omega) {
    if (!trace.is_open()) return;
    trace << json{{"t", st.t},         {"theta", st.theta}, {"omega_cmd", omega},
                  {"v_in", st.v_in},   {"v_poured", st.v_poured},
                  {"q", st.q},         {"sensor", st.sensor}}
                 .dump()
          << '\n';
  };

  ClosedLoop loop(rc);
  controller->reset({rc.container, rc.vol_total, rc.vol_2pour, rc.sim.dt, rc.sim.omega_limit});
  std::optional<StopReason> reason;
  while (!reason && !loop.timed_out()) {
    const double omega = controller->step(loop.observation());
    if (!std::isfinite(omega)) {
      reason = StopReason::kControllerFault;
      break;
    }
    dump(loop.state(), clamp_command(omega, rc.sim));
    if (loop.step(omega)) reason = StopReason::kRetracted;
  }
  dump(loop.state(), 0.0);
  const RunResult r = loop.result(reason.value_or(StopReason::kTimeout));
  if (trace.is_open() && !trace.flush()) throw IoError("failed writing trace");

  if (!a.trial.empty()) {
    const Trial trials[] = {r.trajectory};
    save_trials(output_path(g, a.trial), trials);
  }
  if (!g.quiet) {
    std::cout << json{{"controller", name},
                      {"container", rc.container.name()},
                      {"liquid", rc.liquid.name},
                      {"vol_total", rc.vol_total},
                      {"vol_2pour", rc.vol_2pour},
                      {"poured", r.final_poured},
                      {"error", r.final_error},
                      {"overpoured", r.overpoured},
                      {"stop_reason", to_string(r.stop_reason)},
                      {"steps", r.trajectory.size()}}
                     .dump()
              << "\n";
  }
  return 0;
}

// -------------------------------------------------------------- grad-check

struct GradCheck {
  int hidden = 2;
  int seq_len = 5;
};

int grad_check_cmd(const Globals& g, const GradCheck& a) {
  if (a.hidden < 1 || a.seq_len < 1) throw UsageError("--hidden and --seq-len must be >= 1");
  const GradCheckResult r = gradient_check(g.seed, a.hidden, a.seq_len);
  if (!g.quiet) {
    for (const TensorCheck& t : r.tensors) {
      std::printf("%-6s %.3e\n", t.name.c_str(), t.max_rel_error);
    }
  }
  std::printf("max_rel_error %.3e\n", r.max_rel_error);
  return r.max_rel_error <= kGradTolerance ? 0 : 1;
}

// ------------------------------------------------------------------- serve

struct Serve {
  unsigned short port = 8080;
  std::string address = "127.0.0.1";
  std::string registry;
  std::string out = "sessions";
  std::string static_dir;
  std::vector<CLI::Option*> opts;
};

int serve_cmd(const Globals& g, Serve& a, const json& cfg) {
  const json s = section(cfg, "serve");
  overlay(a.opts[0], s, "port", a.port);
  overlay(a.opts[1], s, "address", a.address);
  overlay(a.opts[2], cfg, "registry", a.registry);
  overlay(a.opts[3], s, "out", a.out);
  overlay(a.opts[4], s, "static", a.static_dir);
  const Physics phys = load_physics(cfg);

  ServeOptions o;
  o.address = a.address;
  o.port = a.port;
  o.registry = load_registry(a.registry);
  o.out_dir = g.out_dir.empty() || fs::path(a.out).is_absolute() ? fs::path(a.out)
                                                                 : fs::path(g.out_dir) / a.out;
  o.static_dir = a.static_dir;
  o.sim = phys.sim;
  o.sensor = phys.sensor;
  o.seed = g.seed;
  o.timeout_s = phys.timeout_s;

  // Signals go to a waiting thread so the server can be stopped cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionServer server(o);
  const unsigned short port = server.listen();
  if (!g.quiet) {
    std::cout << "listening on http://" << o.address << ":" << port << " (session endpoint "
              << "/api/session)" << std::endl;
  }
  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  // run() only returns after stop(), which the waiter calls.
  waiter.join();
  return 0;
}

int exit_code(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const UsageError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const ParseError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 3;
  return 1;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Closed-loop accurate pouring: simulator, LSTM velocity generator and "
               "evaluation harness.",
               "pourbench"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Master seed for every stochastic output")
      ->capture_default_str();
  app.add_option("--config", g.config,
                 "JSON config merged under the flags (fallback: $POURBENCH_CONFIG)");
  app.add_option("--out", g.out_dir, "Directory for relative output paths");
  app.add_flag("--quiet,-q", g.quiet, "Only print results and errors");

  GenData gd;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate scripted demonstration trials");
  gd.n_opt = gen->add_option("--n", gd.n, "Number of trials")->capture_default_str();
  gd.registry_opt = gen->add_option("--registry", gd.registry, "Container registry (JSON)");
  gd.out_opt = gen->add_option("--out", gd.out, "Trial file (JSON lines)")->capture_default_str();

  Train tr;
  CLI::App* trn = app.add_subcommand("train", "Train the LSTM velocity generator");
  tr.opts = {
      trn->add_option("--data", tr.data, "Trial file (JSON lines)"),
      trn->add_option("--out", tr.out, "Checkpoint path")->capture_default_str(),
      trn->add_option("--epochs", tr.hyper.epochs, "Training epochs")->capture_default_str(),
      trn->add_option("--lr", tr.hyper.lr, "Adam learning rate")->capture_default_str(),
      trn->add_option("--batch", tr.hyper.batch, "Trials per batch")->capture_default_str(),
      trn->add_option("--clip-norm", tr.hyper.clip_norm, "Global gradient norm limit")
          ->capture_default_str(),
      trn->add_option("--val-frac", tr.hyper.val_frac, "Validation fraction")
          ->capture_default_str(),
      trn->add_option("--hidden", tr.hyper.hidden, "LSTM units")->capture_default_str(),
      trn->add_option("--threads", tr.hyper.threads,
                      "Gradient worker threads (results do not depend on it)")
          ->capture_default_str(),
  };

  Eval ev;
  CLI::App* evl = app.add_subcommand("eval", "Run a seeded container or viscosity sweep");
  ev.opts = {
      evl->add_option("--model", ev.model, "Checkpoint to evaluate"),
      evl->add_option("--sweep", ev.sweep, "containers or viscosity")
          ->check(CLI::IsMember({"containers", "viscosity"}))
          ->capture_default_str(),
      evl->add_option("--registry", ev.registry, "Container registry (JSON)"),
      evl->add_option("--pours", ev.pours, "Pours per condition")->capture_default_str(),
      evl->add_option("--liquid", ev.liquid, "Liquid for the container sweep")
          ->capture_default_str(),
      evl->add_option("--container", ev.container, "Container for the viscosity sweep")
          ->capture_default_str(),
      evl->add_option("--liquids", ev.liquids, "Liquids for the viscosity sweep (default: all)")
          ->delimiter(','),
      evl->add_option("--out", ev.out,
                      "Report path; .json or .csv picks one format, otherwise both")
          ->capture_default_str(),
  };
  evl->add_flag("--baseline", ev.baseline, "Evaluate the scripted proportional controller")
      ->excludes(ev.opts[0]);
  evl->add_option("--noise-std", ev.noise_std, "Override the sensor noise std (mL)");

  Simulate sm;
  CLI::App* sim = app.add_subcommand("simulate", "Run one closed-loop pour");
  sm.opts = {
      sim->add_option("--model", sm.model, "Checkpoint driving the pour"),
      sim->add_option("--vol-total", sm.vol_total, "Initial volume (mL)")->capture_default_str(),
      sim->add_option("--vol-2pour", sm.vol_2pour, "Volume to pour (mL)")->capture_default_str(),
      sim->add_option("--container", sm.container, "Registry container")->capture_default_str(),
      sim->add_option("--liquid", sm.liquid, "Registry liquid")->capture_default_str(),
      sim->add_option("--registry", sm.registry, "Container registry (JSON)"),
  };
  sim->add_flag("--baseline", sm.baseline, "Use the scripted proportional controller")
      ->excludes(sm.opts[0]);
  sim->add_option("--trace", sm.trace, "Per-step trace (JSON lines)");
  sim->add_option("--trial", sm.trial, "Save the pour as a trial (JSON lines)");
  sim->add_option("--noise-std", sm.noise_std, "Override the sensor noise std (mL)");

  GradCheck gc;
  CLI::App* grad = app.add_subcommand("grad-check", "Compare BPTT with finite differences");
  grad->add_option("--hidden", gc.hidden, "LSTM units")->capture_default_str();
  grad->add_option("--seq-len", gc.seq_len, "Sequence length")->capture_default_str();

  Serve sv;
  CLI::App* srv = app.add_subcommand("serve", "Serve live human pouring sessions");
  sv.opts = {
      srv->add_option("--port", sv.port, "TCP port (0 picks one)")->capture_default_str(),
      srv->add_option("--address", sv.address, "Bind address")->capture_default_str(),
      srv->add_option("--registry", sv.registry, "Container registry (JSON)"),
      srv->add_option("--out", sv.out, "Directory for recorded sessions")->capture_default_str(),
      srv->add_option("--static", sv.static_dir, "Directory with the UI bundle"),
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "pourbench: " << e.what() << "\n";
    return 2;
  }

  try {
    const json cfg = load_config(g);
    overlay<std::uint64_t>(app.get_option("--seed"), cfg, "seed", g.seed);
    overlay<bool>(app.get_option("--quiet"), cfg, "quiet", g.quiet);
    overlay<std::string>(app.get_option("--out"), cfg, "out", g.out_dir);
    if (gen->parsed()) return gen_data(g, gd, cfg);
    if (trn->parsed()) return train_cmd(g, tr, cfg);
    if (evl->parsed()) return eval_cmd(g, ev, cfg);
    if (sim->parsed()) return simulate_cmd(g, sm, cfg);
    if (grad->parsed()) return grad_check_cmd(g, gc);
    if (srv->parsed()) return serve_cmd(g, sv, cfg);
  } catch (const Error& e) {
    std::cerr << "pourbench: " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "pourbench: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "pourbench: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pourbench::cli
