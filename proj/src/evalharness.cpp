#include "pourbench/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pourbench/demo.hpp"
#include "pourbench/errors.hpp"
#include "pourbench/json_io.hpp"
#include "pourbench/seeding.hpp"

namespace pourbench {

namespace {

struct Reference {
  const char* condition;
  bool in_training;
  double mu_e;
  double sigma_e;
};

// Published results from physical pours, kept for context only.
constexpr Reference kContainerReference[] = {
    {"red", true, 3.71, 3.88},          {"slender_bottle", false, 4.12, 4.29},
    {"bubble", false, 6.77, 5.76},      {"glass", false, 7.32, 8.24},
    {"human", false, 12.37, 9.80},      {"measuring_cup", false, 11.29, 12.82},
    {"fat_bottle", false, 12.35, 8.88},
};

struct LiquidReference {
  const char* liquid;
  double viscosity_cps;
  double mu_e;
  double sigma_e;
};

constexpr LiquidReference kLiquidReference[] = {
    {"water", 1.0, 3.71, 3.88},
    {"oil", 65.0, 4.11, 4.80},
    {"syrup", 2000.0, 15.66, 3.43},
};

std::uint64_t container_seed(std::uint64_t seed, const std::string& name) {
  return derive_seed(seed, {stable_hash("sweep"), stable_hash(name)});
}

ConditionResult run_condition(const ControllerFactory& make, const RegistryEntry& entry,
                              const LiquidSpec& liquid, const SweepConfig& cfg,
                              std::string& controller_name) {
  if (cfg.pours == 0) throw UsageError("a sweep needs at least one pour per condition");
  const std::uint64_t cseed = container_seed(cfg.seed, entry.container.name());
  const std::span<const ContainerSpec> one(&entry.container, 1);

  ConditionResult row;
  row.in_training = entry.in_training;
  row.viscosity_cps = liquid.viscosity_cps;
  std::vector<double> errors;
  for (std::size_t i = 0; i < cfg.pours; ++i) {
    const DemoScenario target = sample_scenario(one, cseed, i);
    RunConfig rc;
    rc.container = entry.container;
    rc.liquid = liquid;
    rc.vol_total = target.vol_total;
    rc.vol_2pour = target.vol_2pour;
    rc.sim = cfg.sim;
    rc.sensor = cfg.sensor;
    rc.sensor.seed = derive_seed(cseed, {stable_hash("sensor"), i});
    rc.timeout_s = cfg.timeout_s;
    std::unique_ptr<Controller> controller = make(rc);
    controller_name = controller->name();
    const RunResult r = run_closed_loop(*controller, rc);
    row.pours.push_back({rc.vol_total, rc.vol_2pour, r.final_poured, r.final_error, r.stop_reason});
    errors.push_back(r.final_error);
  }
  row.stats = error_stats(errors);
  return row;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ErrorStats error_stats(std::span<const double> errors) {
  if (errors.empty()) throw UsageError("error statistics need at least one error");
  const auto n = static_cast<double>(errors.size());
  double sum = 0.0;
  for (double e : errors) sum += e;
  const double mean = sum / n;
  double ss = 0.0;
  for (double e : errors) ss += (e - mean) * (e - mean);
  const double sigma = errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sigma, errors.size()};
}

SweepReport run_container_sweep(const ControllerFactory& make, const ContainerRegistry& registry,
                                const LiquidSpec& liquid, const SweepConfig& cfg) {
  SweepReport report;
  report.kind = SweepKind::kContainers;
  report.config = cfg;
  report.liquid = liquid.name;
  for (const RegistryEntry& e : registry.evaluation_entries()) {
    ConditionResult row = run_condition(make, e, liquid, cfg, report.controller);
    row.condition = e.container.name();
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw ConfigError("registry has no containers marked for evaluation");
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ConditionResult& a, const ConditionResult& b) {
                     return a.stats.mu_e < b.stats.mu_e;
                   });
  return report;
}

SweepReport run_viscosity_sweep(const ControllerFactory& make, const RegistryEntry& container,
                                std::span<const LiquidSpec> liquids, const SweepConfig& cfg) {
  if (liquids.empty()) throw UsageError("viscosity sweep needs at least one liquid");
  SweepReport report;
  report.kind = SweepKind::kViscosity;
  report.config = cfg;
  report.container = container.container.name();
  for (const LiquidSpec& l : liquids) {
    l.validate();
    ConditionResult row = run_condition(make, container, l, cfg, report.controller);
    row.condition = l.name;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string to_string(SweepKind kind) {
  return kind == SweepKind::kContainers ? "containers" : "viscosity";
}

std::string report_csv(const SweepReport& report) {
  std::string out = "condition,in_training,n,mu_e_ml,sigma_e_ml,seed\n";
  for (const ConditionResult& r : report.rows) {
    out += r.condition + ',' + (r.in_training ? "true" : "false") + ',' +
           std::to_string(r.stats.n) + ',' + fmt(r.stats.mu_e) + ',' + fmt(r.stats.sigma_e) +
           ',' + std::to_string(report.config.seed) + '\n';
  }
  return out;
}

std::string report_json(const SweepReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const ConditionResult& r : report.rows) {
    json pours = json::array();
    json errors = json::array();
    for (const PourRecord& p : r.pours) {
      pours.push_back({{"vol_total", p.vol_total},
                       {"vol_2pour", p.vol_2pour},
                       {"poured", p.poured},
                       {"error", p.error},
                       {"stop_reason", to_string(p.stop_reason)}});
      errors.push_back(p.error);
    }
    rows.push_back({{"condition", r.condition},
                    {"in_training", r.in_training},
                    {"viscosity_cps", r.viscosity_cps},
                    {"n", r.stats.n},
                    {"mu_e_ml", r.stats.mu_e},
                    {"sigma_e_ml", r.stats.sigma_e},
                    {"errors_ml", errors},
                    {"pours", pours}});
  }

  json reference = json::array();
  if (report.kind == SweepKind::kContainers) {
    for (const Reference& r : kContainerReference) {
      reference.push_back({{"condition", r.condition},
                           {"in_training", r.in_training},
                           {"mu_e_ml", r.mu_e},
                           {"sigma_e_ml", r.sigma_e}});
    }
  } else {
    for (const LiquidReference& r : kLiquidReference) {
      reference.push_back({{"condition", r.liquid},
                           {"viscosity_cps", r.viscosity_cps},
                           {"mu_e_ml", r.mu_e},
                           {"sigma_e_ml", r.sigma_e}});
    }
  }

  json config = {{"pours_per_condition", report.config.pours},
                 {"seed", report.config.seed},
                 {"sim", to_json(report.config.sim)},
                 {"sensor", to_json(report.config.sensor)},
                 {"timeout_s", report.config.timeout_s}};
  if (report.kind == SweepKind::kContainers) {
    config["liquid"] = report.liquid;
  } else {
    config["container"] = report.container;
  }

  const json doc = {
      {"format_version", kFormatVersion},
      {"sweep", to_string(report.kind)},
      {"controller", report.controller},
      {"config", config},
      {"rows", rows},
      {"physical_reference",
       {{"note",
         "Errors measured with physical containers and a motorized pour; shown for "
         "context only. Simulated container dimensions are invented, so magnitudes are "
         "not comparable."},
        {"rows", reference}}}};
  return doc.dump(2) + "\n";
}

void emit_report(const SweepReport& report, const std::string& path, ReportFormat format) {
  if (report.rows.empty()) throw UsageError("refusing to write an empty report");
  const std::string text = format == ReportFormat::kCsv ? report_csv(report) : report_json(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << text;
  if (!out.flush()) throw IoError("failed writing report '" + path + "'");
}

}  // namespace pourbench
