#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

// End-to-end checks against the experiment runner binary.  XPRUNNER_BIN and
// CONFIGS_DIR are injected by the build.

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) res.output += buf.data();
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path case_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ppfl_cli_cases" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "cfg.json";
  std::ofstream(p) << text;
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string line_starting_with(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line;
  }
  return "";
}

const std::string kBin = XPRUNNER_BIN;

// Small synthetic problem shared by the fast end-to-end cases.
const std::string kTinyTrain = R"({
  "seed": 7, "rounds": 3, "clients": 2, "batch_size": 2, "eta": 0.3,
  "mechanism": "pl-identical", "budget": 0.6,
  "dataset": {"classes": 2, "dim": 4, "per_class": 4, "test_per_class": 5}
})";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("bad invocations exit with the config code") {
  const auto dir = case_dir("bad_invocations");

  const auto missing = run_cmd(kBin + " train --config " + (dir / "absent.json").string());
  CHECK(missing.exit_code == 2);
  CHECK(missing.output.find("cannot open") != std::string::npos);

  const auto cfg = write_config(dir, R"({"rounds": 1, "bogus": true})");
  const auto invalid = run_cmd(kBin + " train --config " + cfg.string());
  CHECK(invalid.exit_code == 2);
  CHECK(invalid.output.find("unknown key") != std::string::npos);

  const auto no_config = run_cmd(kBin + " train");
  CHECK(no_config.exit_code != 0);
  CHECK(no_config.output.find("--config") != std::string::npos);

  const auto no_budget = write_config(case_dir("bad_invocations_b"),
                                      R"({"rounds": 1, "mechanism": "pl-learn"})");
  const auto budgetless = run_cmd(kBin + " train --config " + no_budget.string());
  CHECK(budgetless.exit_code == 2);
  CHECK(budgetless.output.find("budget is required") != std::string::npos);
}

TEST_CASE("train is deterministic and takes flags on either side") {
  const auto dir = case_dir("train_det");
  const auto cfg = write_config(dir, kTinyTrain);

  const auto before = run_cmd(kBin + " --config " + cfg.string() + " --out " +
                              (dir / "a").string() + " train");
  REQUIRE(before.exit_code == 0);
  CHECK(before.output.find("final_test_accuracy = ") != std::string::npos);
  CHECK(before.output.find("mechanism = pl-identical") != std::string::npos);

  const auto after = run_cmd(kBin + " train --config " + cfg.string() + " --out " +
                             (dir / "b").string());
  REQUIRE(after.exit_code == 0);

  const std::string csv_a = read_bytes(dir / "a" / "rounds.csv");
  CHECK(csv_a == read_bytes(dir / "b" / "rounds.csv"));
  CHECK(csv_a.rfind("round,client,chi,", 0) == 0);

  const auto other_seed = run_cmd(kBin + " train --config " + cfg.string() + " --seed 19 --out " +
                                  (dir / "c").string());
  REQUIRE(other_seed.exit_code == 0);
  CHECK(csv_a != read_bytes(dir / "c" / "rounds.csv"));
}

TEST_CASE("attack captures a round, snapshots it and replays it bit for bit") {
  const auto dir = case_dir("attack_replay");
  const auto cfg = write_config(dir, R"({
    "seed": 3, "rounds": 1, "clients": 2, "batch_size": 2, "eta": 0.5,
    "mechanism": "none",
    "attack": {"iterations": 150, "round": 1, "keep_every": 50},
    "dataset": {"classes": 2, "dim": 4, "per_class": 4, "test_per_class": 5}
  })");

  const auto live = run_cmd(kBin + " attack --config " + cfg.string() + " --out " +
                            (dir / "a").string());
  REQUIRE(live.exit_code == 0);
  CHECK(live.output.find("snapshot = ") != std::string::npos);
  const std::string client0 = line_starting_with(live.output, "client 0: mse = ");
  REQUIRE_FALSE(client0.empty());
  CHECK_FALSE(line_starting_with(live.output, "client 1: mse = ").empty());

  const fs::path snap = dir / "a" / "snapshot_r1_c0.bin";
  REQUIRE(fs::exists(snap));
  REQUIRE(fs::exists(dir / "a" / "snapshot_r1_c1.bin"));

  // The same run in a fresh process produces the same snapshot bytes.
  const auto rerun = run_cmd(kBin + " attack --config " + cfg.string() + " --out " +
                             (dir / "b").string());
  REQUIRE(rerun.exit_code == 0);
  CHECK(read_bytes(snap) == read_bytes(dir / "b" / "snapshot_r1_c0.bin"));

  // Replaying the saved snapshot reproduces the in-run attack verbatim.
  const auto replay = run_cmd(kBin + " attack --config " + cfg.string() + " --snapshot " +
                              snap.string() + " --out " + (dir / "c").string());
  REQUIRE(replay.exit_code == 0);
  CHECK(line_starting_with(replay.output, "client 0: mse = ") == client0);
}

TEST_CASE("sweep emits the tradeoff and cap tables") {
  const auto dir = case_dir("sweep_tiny");
  const auto cfg = write_config(dir, R"({
    "seed": 11, "rounds": 2, "clients": 2, "batch_size": 2, "eta": 0.3,
    "mechanism": "pl-identical", "budgets": [0.6],
    "sweep": {"seeds": 1},
    "attack": {"iterations": 60, "round": 2, "keep_every": 30},
    "dataset": {"classes": 2, "dim": 4, "per_class": 4, "test_per_class": 5}
  })");

  const auto res = run_cmd(kBin + " sweep --config " + cfg.string() + " --out " +
                           (dir / "out").string());
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("sweep_rows = 2") != std::string::npos);
  CHECK(res.output.find("cap.pl-learn = ") != std::string::npos);
  CHECK(res.output.find("cap.pl-identical = ") != std::string::npos);

  const std::string tradeoff = read_bytes(dir / "out" / "tradeoff.csv");
  CHECK(tradeoff.rfind("budget,variant,accuracy,", 0) == 0);
  CHECK(tradeoff.find("pl-learn") != std::string::npos);
  CHECK(tradeoff.find("pl-identical") != std::string::npos);
  const std::string cap = read_bytes(dir / "out" / "cap.csv");
  CHECK(cap.find("pl-learn,") != std::string::npos);
}

TEST_CASE("verify-theory reports its checks and exit code honestly") {
  const auto dir = case_dir("verify_theory");
  const auto pass_cfg = write_config(dir, R"({
    "seed": 2, "rounds": 1, "mechanism": "none",
    "theory": {"clients": 1, "rounds": 1, "dim": 2,
               "oracle_samples": 4000, "oracle_refine_steps": 40}
  })");
  const auto passed = run_cmd(kBin + " verify-theory --config " + pass_cfg.string() + " --out " +
                              (dir / "pass").string());
  CHECK(passed.exit_code == 0);
  CHECK(passed.output.find("theory_checks = 3") != std::string::npos);
  CHECK(passed.output.find("theory_failures = 0") != std::string::npos);
  const std::string report = read_bytes(dir / "pass" / "theory_report.csv");
  CHECK(report.rfind("check,round,client,observed,bound,pass", 0) == 0);
  CHECK(report.find("learner_steps") != std::string::npos);
  CHECK(report.find("contraction") != std::string::npos);
  CHECK(report.find("near_optimal_gap") != std::string::npos);

  // An impossible slack must surface as a nonzero assertion exit, not a pass.
  const fs::path fail_cfg = dir / "fail.json";
  std::ofstream(fail_cfg) << R"({
    "seed": 2, "rounds": 1, "mechanism": "none",
    "theory": {"clients": 1, "rounds": 1, "dim": 2,
               "oracle_samples": 4000, "oracle_refine_steps": 40, "slack": -10}
  })";
  const auto failed = run_cmd(kBin + " verify-theory --config " + fail_cfg.string() + " --out " +
                              (dir / "fail").string());
  CHECK(failed.exit_code == 3);
  CHECK(failed.output.find("theory_failures = 1") != std::string::npos);
  CHECK(failed.output.find("FAIL near_optimal_gap") != std::string::npos);
}

TEST_CASE("estimate-constants writes the constants table") {
  const auto dir = case_dir("estimate");
  const auto cfg = write_config(dir, R"({
    "seed": 5, "rounds": 1, "clients": 2, "batch_size": 1, "eta": 0.5,
    "mechanism": "none",
    "attack": {"iterations": 250},
    "estimate": {"models": 2, "local_steps": 40, "attempts": 1,
                 "threshold": -0.001, "similarity": "neg-mse", "prior_classes": 50},
    "dataset": {"classes": 2, "dim": 4, "per_class": 4, "test_per_class": 5}
  })");

  const auto res = run_cmd(kBin + " estimate-constants --config " + cfg.string() + " --out " +
                           (dir / "out").string());
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("c1 = ") != std::string::npos);
  CHECK(res.output.find("c2 = ") != std::string::npos);

  const std::string csv = read_bytes(dir / "out" / "constants.csv");
  CHECK(csv.rfind("constant,value", 0) == 0);
  CHECK(csv.find("c1,") != std::string::npos);
  CHECK(csv.find("kappa1_mean,") != std::string::npos);
  CHECK(csv.find("kappa3_max,") != std::string::npos);
}

TEST_SUITE_END();
