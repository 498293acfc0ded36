#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppfl/config.hpp"
#include "ppfl/dataset.hpp"
#include "ppfl/federation.hpp"
#include "ppfl/metrics.hpp"
#include "ppfl/theory.hpp"

namespace ppfl::experiment {

// A fully wired single run: data sharded over clients, held-out set, model
// dimensions resolved against the data.
struct RunSetup {
  numkit::ModelSpec model;
  std::vector<federation::ClientState> clients;
  numkit::Matrix test_inputs;
  std::vector<int> test_labels;
  federation::FedConfig fed;
};

// Builds the run for one (seed, mechanism, budget) cell.  chi is ignored when
// protect is false.
RunSetup prepare_run(const config::ExperimentConfig& cfg, std::uint64_t seed,
                     distortion::MechanismKind mechanism, bool protect, double chi);

// Reconstruction quality of the gradient-inversion attack replayed against
// every captured upload of a run, averaged over clients.
struct AttackOutcome {
  double recon_mse = 0.0;
  double recon_ssim = 0.0;
  double empirical_leakage = 0.0;
  int captures_attacked = 0;
};

AttackOutcome attack_captures(const std::vector<federation::RoundCapture>& captures,
                              const numkit::ModelSpec& model,
                              const config::ExperimentConfig& cfg, std::uint64_t run_seed);

// One budget x mechanism x seed outcome.
struct SweepCell {
  double budget = 0.0;
  distortion::MechanismKind mechanism = distortion::MechanismKind::PlLearn;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double mean_utility_loss = 0.0;
  double mean_distortion_norm = 0.0;
  double recon_mse = 0.0;
  double recon_ssim = 0.0;
  double empirical_leakage = 0.0;
};

// Seed-averaged row, in tradeoff.csv column order.
struct SweepRow {
  double budget = 0.0;
  distortion::MechanismKind mechanism = distortion::MechanismKind::PlLearn;
  double accuracy = 0.0;
  double mean_utility_loss = 0.0;
  double mean_distortion_norm = 0.0;
  double mse = 0.0;
  double ssim = 0.0;
  double empirical_leakage = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // every seed, budget-major then mechanism
  std::vector<SweepRow> rows;    // seed means, same order as tradeoff.csv
  std::vector<std::pair<distortion::MechanismKind, double>> cap_rows;
};

// Full sweep: budgets x sweep.mechanisms x sweep.seeds runs, attack at the
// configured round, tradeoff.csv and cap.csv under out_dir.  Rows are
// appended and flushed per budget x mechanism so partial results survive a
// failure.
SweepResult run_sweep(const config::ExperimentConfig& cfg, const std::string& out_dir);

void write_rounds_csv(const std::string& path, const federation::Trajectory& trajectory);
void write_theory_csv(const std::string& path, const theory::TheoryReport& report);

// Deterministic shortest-exact decimal for CSV cells.
std::string csv_double(double v);

}  // namespace ppfl::experiment
