#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "pourbench/control.hpp"
#include "pourbench/training.hpp"
#include "pourbench/trial.hpp"
#include "test_paths.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("cd '") + dir.string() + "' && '" + POURBENCH_CLI + "' " +
                          args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto dir = testing_paths::scratch_dir("cli_help");
  const Outcome help = run_cli(dir, "--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("gen-data"), std::string::npos);
  EXPECT_EQ(run_cli(dir, "").code, 2);
  EXPECT_EQ(run_cli(dir, "train --bogus").code, 2);
  const Outcome no_data = run_cli(dir, "train");
  EXPECT_EQ(no_data.code, 2);
  EXPECT_EQ(lines(no_data.err).size(), 1u);
  EXPECT_EQ(run_cli(dir, "eval").code, 2);
  EXPECT_EQ(run_cli(dir, "eval --baseline --sweep sideways").code, 2);
}

TEST(Cli, GradCheck) {
  const auto dir = testing_paths::scratch_dir("cli_grad");
  const Outcome r = run_cli(dir, "grad-check");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("max_rel_error"), std::string::npos);
  EXPECT_NE(r.out.find("W_xi"), std::string::npos);
}

TEST(Cli, GenTrainEvalAreDeterministic) {
  const auto dir = testing_paths::scratch_dir("cli_pipeline");
  for (const char* run : {"a", "b"}) {
    const std::string o = std::string(" --out ") + run;
    ASSERT_EQ(run_cli(dir, "--seed 3" + o + " gen-data --n 12").code, 0);
    const Outcome t = run_cli(
        dir, "--seed 3" + o + " train --data " + run + "/trials.jsonl --epochs 2 --hidden 4");
    ASSERT_EQ(t.code, 0) << t.err;
    const auto tl = lines(t.out);
    ASSERT_GE(tl.size(), 4u);
    EXPECT_EQ(tl[0], "epoch,train_mse,val_mse");
    EXPECT_EQ(tl[1].rfind("0,", 0), 0u);
    const Outcome e = run_cli(
        dir, "--seed 3" + o + " eval --model " + run + "/model.json --pours 2 --out report");
    ASSERT_EQ(e.code, 0) << e.err;
  }
  for (const char* f : {"trials.jsonl", "trials.manifest.json", "model.json", "report.csv",
                        "report.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const json manifest = json::parse(slurp(dir / "a" / "trials.manifest.json"));
  EXPECT_EQ(manifest["count"], 12);
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(pourbench::load_trials(dir / "a" / "trials.jsonl").size(), 12u);
  const pourbench::ModelCheckpoint cp =
      pourbench::load_checkpoint((dir / "a" / "model.json").string());
  EXPECT_EQ(cp.params.hidden(), 4);
  EXPECT_EQ(cp.metadata.history.size(), 3u);
  const auto csv = lines(slurp(dir / "a" / "report.csv"));
  EXPECT_EQ(csv[0], "condition,in_training,n,mu_e_ml,sigma_e_ml,seed");
  EXPECT_EQ(csv.size(), 7u);  // red and five unseen containers

  // A different seed changes the data.
  ASSERT_EQ(run_cli(dir, "--seed 4 --out c gen-data --n 12").code, 0);
  EXPECT_NE(slurp(dir / "a" / "trials.jsonl"), slurp(dir / "c" / "trials.jsonl"));
}

TEST(Cli, EvalBaselineViscositySweep) {
  const auto dir = testing_paths::scratch_dir("cli_visc");
  const Outcome r = run_cli(
      dir, "eval --baseline --sweep viscosity --liquids water,syrup --pours 2 --out v.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(dir / "v.csv"));
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[1].rfind("water,", 0), 0u);
  EXPECT_EQ(csv[2].rfind("syrup,", 0), 0u);
  EXPECT_FALSE(fs::exists(dir / "v.csv.json"));
  EXPECT_EQ(run_cli(dir, "eval --baseline --sweep viscosity --liquids mercury").code, 2);
}

TEST(Cli, SimulateTraceAndTrial) {
  const auto dir = testing_paths::scratch_dir("cli_sim");
  const Outcome r = run_cli(
      dir, "--seed 5 simulate --baseline --vol-total 300 --vol-2pour 120 --trace trace.jsonl "
           "--trial trial.jsonl");
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(lines(r.out).back());
  EXPECT_EQ(summary["stop_reason"], "retracted");
  EXPECT_EQ(summary["container"], "red");

  const auto trace = lines(slurp(dir / "trace.jsonl"));
  ASSERT_GT(trace.size(), 10u);
  double prev_poured = 0.0;
  for (const std::string& l : trace) {
    const json j = json::parse(l);
    for (const char* k : {"t", "theta", "omega_cmd", "v_in", "v_poured", "q", "sensor"}) {
      ASSERT_TRUE(j.contains(k)) << k;
    }
    EXPECT_NEAR(j["v_in"].get<double>() + j["v_poured"].get<double>(), 300.0, 1e-9);
    EXPECT_GE(j["v_poured"].get<double>(), prev_poured);
    prev_poured = j["v_poured"].get<double>();
  }
  EXPECT_NEAR(prev_poured, summary["poured"].get<double>(), 1e-12);

  const auto trials = pourbench::load_trials(dir / "trial.jsonl");
  ASSERT_EQ(trials.size(), 1u);
  EXPECT_EQ(trials[0].size(), trace.size());
  pourbench::RunConfig rc;
  rc.vol_total = 300.0;
  rc.vol_2pour = 120.0;
  EXPECT_NEAR(pourbench::replay_trial(trials[0], rc), prev_poured, 1e-12);
}

TEST(Cli, ConfigFileOverlay) {
  const auto dir = testing_paths::scratch_dir("cli_config");
  std::ofstream(dir / "cfg.json") << R"({"seed": 9, "gen_data": {"n": 11, "out": "c.jsonl"}})";
  ASSERT_EQ(run_cli(dir, "--config cfg.json gen-data").code, 0);
  EXPECT_EQ(pourbench::load_trials(dir / "c.jsonl").size(), 11u);
  EXPECT_EQ(json::parse(slurp(dir / "c.manifest.json"))["seed"], 9);
  // Flags win over the file.
  ASSERT_EQ(run_cli(dir, "--config cfg.json gen-data --n 10 --out d.jsonl").code, 0);
  EXPECT_EQ(pourbench::load_trials(dir / "d.jsonl").size(), 10u);

  std::ofstream(dir / "bad.json") << R"({"gen_data": {"n": "many"}})";
  EXPECT_EQ(run_cli(dir, "--config bad.json gen-data").code, 2);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_EQ(run_cli(dir, "--config broken.json gen-data").code, 3);
}

TEST(Cli, FileErrorsReportLocation) {
  const auto dir = testing_paths::scratch_dir("cli_files");
  EXPECT_EQ(run_cli(dir, "train --data nowhere.jsonl").code, 3);
  std::ofstream(dir / "bad.jsonl") << "{\"vol_total\": 1}\n";
  const Outcome r = run_cli(dir, "train --data bad.jsonl");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  std::ofstream(dir / "few.jsonl") << "";
  EXPECT_EQ(run_cli(dir, "train --data few.jsonl").code, 2);
  EXPECT_EQ(run_cli(dir, "eval --model nowhere.json").code, 3);
  EXPECT_EQ(run_cli(dir, "simulate --baseline --container teapot").code, 2);
  EXPECT_EQ(run_cli(dir, "simulate --baseline --vol-total 5000").code, 2);
}

TEST(Cli, ServeFailsOnBusyPort) {
  const auto dir = testing_paths::scratch_dir("cli_serve");
  boost::asio::io_context io;
  boost::asio::ip::tcp::acceptor holder(
      io, boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), 0));
  const unsigned short port = holder.local_endpoint().port();
  const Outcome r = run_cli(dir, "serve --port " + std::to_string(port));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines(r.err).size(), 1u);
}
