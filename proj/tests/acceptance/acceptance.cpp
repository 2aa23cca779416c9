// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pourbench/demo.hpp"
#include "pourbench/evalharness.hpp"
#include "pourbench/geometry.hpp"
#include "pourbench/lstm.hpp"
#include "pourbench/registry.hpp"
#include "pourbench/sim.hpp"
#include "pourbench/training.hpp"

using namespace pourbench;
namespace fs = std::filesystem;

namespace {

// Tolerances and protocol constants.
constexpr int kGeometryCases = 20;
constexpr long kMonteCarloSamples = 1'000'000;
constexpr double kMonteCarloRelTol = 0.005;
constexpr double kClosedFormRelTol = 1e-6;
constexpr int kConservationRuns = 100;
constexpr double kConservationTol = 1e-9;  // mL
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-6;
constexpr double kTrainingRatio = 0.1;
constexpr double kTrainingBudgetS = 600.0;
constexpr double kInTrainingMaxMl = 10.0;
constexpr double kUnseenMaxMl = 20.0;
constexpr double kOilOverWaterMax = 2.0;
constexpr double kSweepBudgetS = 120.0;
constexpr std::size_t kPours = 15;

// The seeded training run every closed-loop criterion uses.
constexpr std::size_t kTrials = 284;
constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kTrainSeed = 3;
constexpr std::uint64_t kEvalSeed = 0;
constexpr int kEpochs = 400;
constexpr double kLearningRate = 2e-3;
constexpr int kBatch = 8;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void geometry_oracle() {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> ud(40.0, 120.0), uh(60.0, 200.0);
  std::uniform_real_distribution<double> ut(0.0, std::numbers::pi / 2);
  double worst_mc = 0.0;
  double worst_wall = 0.0;
  int wall_cases = 0;
  for (int i = 0; i < kGeometryCases; ++i) {
    const double d = ud(rng), h = uh(rng);
    double th = ut(rng);
    while (th <= 0.0) th = ut(rng);
    const ContainerSpec c("case", d, h);
    const double v = tilted_capacity(c, th);
    const double mc = oracle::monte_carlo_volume(d, h, th, rng(), kMonteCarloSamples);
    worst_mc = std::max(worst_mc, std::abs(v - mc) / mc);
    // Closed form of the wall case, at this tilt when it applies and at a
    // wall-case tilt of the same container otherwise.
    const double edge = std::atan(h / d);
    const double tw = std::tan(th) <= h / d ? th : edge * (i + 1.0) / (kGeometryCases + 1.0);
    const double r = d / 2.0;
    const double closed = std::numbers::pi * r * r * (h - r * std::tan(tw)) / 1000.0;
    worst_wall = std::max(worst_wall, std::abs(tilted_capacity(c, tw) - closed) / closed);
    ++wall_cases;
  }
  report(worst_mc <= kMonteCarloRelTol, "geometry_monte_carlo",
         fmt("max rel err %.5f over 20 cases, 1e6 samples each (tol %.3f)", worst_mc,
             kMonteCarloRelTol));
  report(worst_wall <= kClosedFormRelTol, "geometry_closed_form",
         fmt("max rel err %.2e over %.0f wall-case tilts (tol %.0e)", worst_wall, wall_cases,
             kClosedFormRelTol));
}

void conservation() {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> ud(40.0, 120.0), uh(60.0, 200.0), fill(0.1, 1.0);
  std::uniform_real_distribution<double> cmd(-1.5, 1.5), visc(0.0, 3.5);
  std::uniform_int_distribution<int> len(200, 1500);
  double worst = 0.0;
  bool monotone = true;
  for (int run = 0; run < kConservationRuns; ++run) {
    const ContainerSpec c("c", ud(rng), uh(rng));
    const double total = fill(rng) * capacity_upright(c);
    SensorModel sm;
    sm.seed = rng();
    PourSimulator sim(c, LiquidSpec{"l", std::pow(10.0, visc(rng))}, SimConfig{}, sm, total);
    double prev = 0.0;
    double w = 0.0;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      // Piecewise-constant random commands with a bias towards tilting.
      if (k % 20 == 0) w = cmd(rng) + 0.4;
      const PourState& s = sim.step(w);
      worst = std::max(worst, std::abs(s.v_in + s.v_poured - total));
      monotone = monotone && s.v_poured >= prev;
      prev = s.v_poured;
    }
  }
  report(worst <= kConservationTol && monotone, "conservation",
         fmt("max |v_in + v_poured - vol_total| %.2e mL over 100 trajectories (tol 1e-9), "
             "poured volume ",
             worst) +
             (monotone ? "non-decreasing" : "DECREASED"));
}

void gradient() {
  // Central differences on the loss, computed here rather than by the library.
  const int H = 2, T = 5, D = 6;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> n(0.0, 1.0);
  LstmParams p(D, H);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()(i) = u(rng);
  std::vector<Sequence> batch(2);
  for (Sequence& s : batch) {
    s.inputs.resize(D, T);
    s.targets.resize(T);
    for (int t = 0; t < T; ++t) {
      for (int d = 0; d < D; ++d) s.inputs(d, t) = n(rng);
      s.targets(t) = n(rng);
    }
  }
  const Gradient g = backward(p, batch);
  double worst = 0.0;
  std::string worst_tensor;
  for (const LstmParams::Tensor& t : p.tensors()) {
    for (int r = 0; r < t.rows; ++r) {
      for (int c = 0; c < t.cols; ++c) {
        const std::size_t i = t.offset + static_cast<std::size_t>(c) * t.stride + r;
        LstmParams plus = p, minus = p;
        plus.values()(i) += kGradStep;
        minus.values()(i) -= kGradStep;
        const double num =
            (evaluate_loss(plus, batch) - evaluate_loss(minus, batch)) / (2.0 * kGradStep);
        const double ana = g.grad.values()(i);
        const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
        if (rel > worst) {
          worst = rel;
          worst_tensor = t.name;
        }
      }
    }
  }
  report(worst <= kGradRelTol, "gradient_check",
         fmt("max rel err %.2e (tensor ", worst) + worst_tensor +
             fmt(") hidden=2 seq-len=5 step 1e-6 (tol %.0e)", kGradRelTol));
}

struct Trained {
  ModelCheckpoint cp;
  bool ok = false;
};

Trained training(const ContainerRegistry& reg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Trial> trials =
      generate_dataset(kTrials, reg.training_containers(), kDataSeed, DemoSettings{});
  TrainHyper h;
  h.epochs = kEpochs;
  h.lr = kLearningRate;
  h.batch = kBatch;
  h.seed = kTrainSeed;
  Trained out;
  out.cp = train(trials, h);
  const double secs = seconds_since(t0);
  const TrainMetadata& m = out.cp.metadata;
  const double ratio = m.best_val_mse / m.initial_val_mse;
  out.ok = true;
  report(ratio <= kTrainingRatio && secs <= kTrainingBudgetS, "training_progress",
         fmt("best val MSE %.5f at epoch %.0f = %.4f x initial %.4f", m.best_val_mse,
             m.best_epoch, ratio, m.initial_val_mse) +
             fmt(" (tol %.1f), %.0f s (budget %.0f s)", kTrainingRatio, secs, kTrainingBudgetS));
  return out;
}

SweepConfig sweep_config() {
  SweepConfig cfg;
  cfg.pours = kPours;
  cfg.seed = kEvalSeed;
  return cfg;
}

void closed_loop(const ContainerRegistry& reg, const ModelCheckpoint& cp) {
  const auto t0 = std::chrono::steady_clock::now();
  const ControllerFactory lstm = [&cp](const RunConfig&) { return lstm_controller(cp); };
  const ControllerFactory base = [](const RunConfig& rc) { return baseline_controller(rc); };
  const SweepReport rep = run_container_sweep(lstm, reg, reg.find_liquid("water"), sweep_config());
  const double secs = seconds_since(t0);

  double in_training = NAN;
  double unseen_sum = 0.0, unseen_worst = 0.0;
  int unseen = 0;
  std::string detail;
  for (const ConditionResult& r : rep.rows) {
    detail += " " + r.condition + fmt("=%.2f", r.stats.mu_e);
    if (r.in_training) {
      in_training = r.stats.mu_e;
    } else {
      unseen_sum += r.stats.mu_e;
      unseen_worst = std::max(unseen_worst, r.stats.mu_e);
      ++unseen;
    }
  }
  const double unseen_mean = unseen_sum / unseen;
  report(in_training <= kInTrainingMaxMl && secs <= kSweepBudgetS, "closed_loop_in_training",
         fmt("red mu_e %.2f mL over 15 pours (tol %.0f), sweep %.1f s (budget %.0f s)",
             in_training, kInTrainingMaxMl, secs, kSweepBudgetS));
  report(unseen_worst <= kUnseenMaxMl, "closed_loop_unseen",
         fmt("worst unseen mu_e %.2f mL (tol %.0f);", unseen_worst, kUnseenMaxMl) + detail);
  report(in_training <= unseen_mean, "closed_loop_ordering",
         fmt("red %.2f <= mean unseen %.2f mL", in_training, unseen_mean));

  ContainerRegistry red_only({reg.find("red")}, reg.liquids());
  const SweepReport b = run_container_sweep(base, red_only, reg.find_liquid("water"),
                                            sweep_config());
  const double baseline = b.rows.at(0).stats.mu_e;
  report(in_training <= baseline, "baseline_comparison",
         fmt("lstm %.2f <= baseline %.2f mL on red, same 15 targets", in_training, baseline));

  const SweepReport v = run_viscosity_sweep(lstm, reg.find("red"), reg.liquids(), sweep_config());
  double water = NAN, oil = NAN, syrup = NAN;
  for (const ConditionResult& r : v.rows) {
    if (r.condition == "water") water = r.stats.mu_e;
    if (r.condition == "oil") oil = r.stats.mu_e;
    if (r.condition == "syrup") syrup = r.stats.mu_e;
  }
  report(water <= oil && oil <= syrup && oil <= kOilOverWaterMax * water, "viscosity_ordering",
         fmt("water %.2f <= oil %.2f <= syrup %.2f mL, oil/water %.2f (tol 2)", water, oil, syrup,
             oil / water));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void cli_determinism() {
  const fs::path root = fs::path(POURBENCH_TEST_SCRATCH) / "acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = POURBENCH_CLI;
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    const std::string base = "'" + cli + "' -q --seed 7 --out '" + (root / run).string() + "' ";
    for (const std::string& args :
         {std::string("gen-data --n 284"),
          std::string("train --data '") + (root / run / "trials.jsonl").string() +
              "' --epochs 3 --threads 2",
          std::string("eval --model '") + (root / run / "model.json").string() +
              "' --pours 3 --out report"}) {
      const int status = std::system((base + args + " > /dev/null").c_str());
      ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    }
  }
  std::string detail;
  bool same = ran;
  for (const char* f : {"trials.jsonl", "model.json", "report.json", "report.csv"}) {
    const bool eq = fs::exists(root / "a" / f) && slurp(root / "a" / f) == slurp(root / "b" / f);
    same = same && eq;
    detail += std::string(" ") + f + (eq ? " identical" : " DIFFERS");
  }
  report(same, "determinism", std::string(ran ? "" : "a command failed;") + detail);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const ContainerRegistry reg = ContainerRegistry::load(ContainerRegistry::default_path());
  geometry_oracle();
  conservation();
  gradient();
  const Trained t = training(reg);
  closed_loop(reg, t.cp);
  cli_determinism();
  std::printf("%s: %d failed, %.0f s\n", failures == 0 ? "ALL PASS" : "SOME FAILED", failures,
              seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
