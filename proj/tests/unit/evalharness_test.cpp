#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pourbench/errors.hpp"
#include "pourbench/evalharness.hpp"
#include "test_paths.hpp"

using namespace pourbench;

namespace {

ContainerRegistry small_registry() {
  return ContainerRegistry(
      {{ContainerSpec("red", 70, 107), true, true},
       {ContainerSpec("wide", 92, 120), true, false},
       {ContainerSpec("glass", 66, 125), false, true}},
      {{"water", 1.0}, {"oil", 65.0}});
}

SweepConfig quick_sweep() {
  SweepConfig cfg;
  cfg.pours = 3;
  cfg.seed = 8;
  return cfg;
}

ControllerFactory baseline() {
  return [](const RunConfig& rc) { return baseline_controller(rc); };
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(ErrorStats, Examples) {
  const std::vector<double> same{4, 4, 4};
  ErrorStats s = error_stats(same);
  EXPECT_EQ(s.mu_e, 4.0);
  EXPECT_EQ(s.sigma_e, 0.0);
  EXPECT_EQ(s.n, 3u);
  const std::vector<double> two{3, 5};
  s = error_stats(two);
  EXPECT_EQ(s.mu_e, 4.0);
  EXPECT_NEAR(s.sigma_e, std::sqrt(2.0), 1e-12);
  const std::vector<double> one{7};
  EXPECT_EQ(error_stats(one).sigma_e, 0.0);
  EXPECT_THROW(error_stats(std::vector<double>{}), UsageError);
}

TEST(ErrorStats, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(0.2);
  for (int n : {2, 5, 15, 100}) {
    std::vector<double> x(n);
    for (double& v : x) v = e(rng);
    long double sum = 0;
    for (double v : x) sum += v;
    const long double mean = sum / n;
    long double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const ErrorStats s = error_stats(x);
    EXPECT_NEAR(s.mu_e, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(s.sigma_e, static_cast<double>(std::sqrt(ss / (n - 1))), 1e-12);
  }
}

TEST(ContainerSweep, RowsAndTargets) {
  const SweepReport rep =
      run_container_sweep(baseline(), small_registry(), LiquidSpec{}, quick_sweep());
  ASSERT_EQ(rep.rows.size(), 2u);  // "wide" is training-only
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    EXPECT_LE(rep.rows[i - 1].stats.mu_e, rep.rows[i].stats.mu_e);
  }
  for (const ConditionResult& row : rep.rows) {
    ASSERT_EQ(row.pours.size(), 3u);
    std::vector<double> errs;
    for (const PourRecord& p : row.pours) {
      EXPECT_NEAR(p.error, std::abs(p.poured - p.vol_2pour), 1e-12);
      EXPECT_GE(p.vol_2pour, 40.0);
      EXPECT_LE(p.vol_2pour, p.vol_total - 20.0);
      errs.push_back(p.error);
    }
    const ErrorStats s = error_stats(errs);
    EXPECT_EQ(row.stats.mu_e, s.mu_e);
    EXPECT_EQ(row.stats.sigma_e, s.sigma_e);
    EXPECT_EQ(row.in_training, row.condition == "red");
  }
}

TEST(ContainerSweep, TargetsIndependentOfController) {
  ControllerFactory idle = [](const RunConfig&) -> std::unique_ptr<Controller> {
    struct Idle final : Controller {
      void reset(const TaskInfo&) override {}
      double step(const Observation&) override { return 0.0; }
      std::string name() const override { return "idle"; }
    };
    return std::make_unique<Idle>();
  };
  SweepConfig cfg = quick_sweep();
  cfg.timeout_s = 0.2;
  const SweepReport a = run_container_sweep(idle, small_registry(), LiquidSpec{}, cfg);
  const SweepReport b =
      run_container_sweep(baseline(), small_registry(), LiquidSpec{}, quick_sweep());
  for (const ConditionResult& ra : a.rows) {
    for (const ConditionResult& rb : b.rows) {
      if (ra.condition != rb.condition) continue;
      for (std::size_t i = 0; i < ra.pours.size(); ++i) {
        EXPECT_EQ(ra.pours[i].vol_2pour, rb.pours[i].vol_2pour);
        EXPECT_EQ(ra.pours[i].error, ra.pours[i].vol_2pour);
        EXPECT_EQ(ra.pours[i].stop_reason, StopReason::kTimeout);
      }
    }
  }
}

TEST(ViscositySweep, SameTargetsPerLiquid) {
  const ContainerRegistry reg = small_registry();
  const SweepReport rep =
      run_viscosity_sweep(baseline(), reg.find("red"), reg.liquids(), quick_sweep());
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].condition, "water");
  EXPECT_EQ(rep.rows[1].condition, "oil");
  EXPECT_EQ(rep.rows[1].viscosity_cps, 65.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rep.rows[0].pours[i].vol_2pour, rep.rows[1].pours[i].vol_2pour);
  }
  // The water column matches the container sweep of the same seed.
  const SweepReport cont =
      run_container_sweep(baseline(), reg, LiquidSpec{}, quick_sweep());
  for (const ConditionResult& row : cont.rows) {
    if (row.condition == "red") {
      EXPECT_EQ(row.stats.mu_e, rep.rows[0].stats.mu_e);
    }
  }
}

TEST(Reports, CsvLayoutAndDeterminism) {
  const SweepReport rep =
      run_container_sweep(baseline(), small_registry(), LiquidSpec{}, quick_sweep());
  const std::string csv = report_csv(rep);
  EXPECT_EQ(csv, report_csv(run_container_sweep(baseline(), small_registry(), LiquidSpec{},
                                                quick_sweep())));
  const auto ls = lines(csv);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0], "condition,in_training,n,mu_e_ml,sigma_e_ml,seed");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream row(ls[i]);
    std::string name, in_training, n, mu, sigma, seed;
    std::getline(row, name, ',');
    std::getline(row, in_training, ',');
    std::getline(row, n, ',');
    std::getline(row, mu, ',');
    std::getline(row, sigma, ',');
    std::getline(row, seed, ',');
    EXPECT_EQ(name, rep.rows[i - 1].condition);
    EXPECT_EQ(n, "3");
    EXPECT_NEAR(std::stod(mu), rep.rows[i - 1].stats.mu_e, 1e-6);
    EXPECT_NEAR(std::stod(sigma), rep.rows[i - 1].stats.sigma_e, 1e-6);
    EXPECT_EQ(seed, "8");
  }
}

TEST(Reports, JsonContent) {
  const SweepReport rep =
      run_container_sweep(baseline(), small_registry(), LiquidSpec{}, quick_sweep());
  const nlohmann::json j = nlohmann::json::parse(report_json(rep));
  EXPECT_EQ(j["sweep"], "containers");
  EXPECT_EQ(j["controller"], "scripted");
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["errors_ml"].size(), 3u);
  EXPECT_TRUE(j.contains("physical_reference"));
  EXPECT_EQ(report_json(rep), report_json(rep));
}

TEST(Reports, EmitErrors) {
  const auto dir = testing_paths::scratch_dir("reports");
  SweepReport empty;
  EXPECT_THROW(emit_report(empty, (dir / "e.csv").string(), ReportFormat::kCsv), UsageError);
  const SweepReport rep =
      run_container_sweep(baseline(), small_registry(), LiquidSpec{}, quick_sweep());
  EXPECT_THROW(emit_report(rep, (dir / "no" / "such" / "r.csv").string(), ReportFormat::kCsv),
               IoError);
  emit_report(rep, (dir / "r.csv").string(), ReportFormat::kCsv);
  std::ifstream in(dir / "r.csv");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, report_csv(rep));
}
