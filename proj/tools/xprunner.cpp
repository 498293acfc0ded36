#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ppfl/attack.hpp"
#include "ppfl/config.hpp"
#include "ppfl/experiment.hpp"
#include "ppfl/federation.hpp"
#include "ppfl/metrics.hpp"
#include "ppfl/rng.hpp"
#include "ppfl/snapshot.hpp"
#include "ppfl/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;

struct GlobalArgs {
  std::string config_path;
  std::string out_override;
  std::int64_t seed_override = -1;
  std::string snapshot_path;  // attack only
};

ppfl::config::ExperimentConfig load_effective(const GlobalArgs& args) {
  auto cfg = ppfl::config::load_config(args.config_path);
  if (args.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed_override);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  return cfg;
}

double single_budget(const ppfl::config::ExperimentConfig& cfg) {
  if (!cfg.protect) return 0.0;
  if (cfg.budgets.empty()) {
    throw ppfl::ConfigError("config: a budget is required for mechanism " +
                            ppfl::config::mechanism_name(cfg.mechanism, cfg.protect));
  }
  return cfg.budgets.front();
}

int cmd_train(const GlobalArgs& args) {
  const auto cfg = load_effective(args);
  std::cout << ppfl::config::echo_config(cfg);

  auto setup = ppfl::experiment::prepare_run(cfg, cfg.seed, cfg.mechanism, cfg.protect,
                                             single_budget(cfg));
  const auto traj = ppfl::federation::run_training(setup.fed, setup.clients, setup.test_inputs,
                                                   setup.test_labels);
  std::filesystem::create_directories(cfg.output_dir);
  ppfl::experiment::write_rounds_csv(cfg.output_dir + "/rounds.csv", traj);

  std::cout << "final_test_accuracy = " << ppfl::experiment::csv_double(traj.final_test_accuracy)
            << "\n"
            << "initial_global_loss = " << ppfl::experiment::csv_double(traj.initial_global_loss)
            << "\n"
            << "final_global_loss = " << ppfl::experiment::csv_double(traj.final_global_loss)
            << "\n"
            << "mean_utility_loss = " << ppfl::experiment::csv_double(traj.mean_utility_loss)
            << "\n"
            << "rounds_csv = " << cfg.output_dir << "/rounds.csv\n";
  return kExitOk;
}

int cmd_sweep(const GlobalArgs& args) {
  const auto cfg = load_effective(args);
  std::cout << ppfl::config::echo_config(cfg);
  const auto result = ppfl::experiment::run_sweep(cfg, cfg.output_dir);
  std::cout << "sweep_rows = " << result.rows.size() << "\n";
  for (const auto& [mech, value] : result.cap_rows) {
    std::cout << "cap." << ppfl::config::mechanism_name(mech, true) << " = "
              << ppfl::experiment::csv_double(value) << "\n";
  }
  std::cout << "tradeoff_csv = " << cfg.output_dir << "/tradeoff.csv\n"
            << "cap_csv = " << cfg.output_dir << "/cap.csv\n";
  return kExitOk;
}

// Model structure is recoverable from the parameter blocks: softmax
// regression uploads one (classes x inputs) block, the one-hidden-layer net
// uploads four.
ppfl::numkit::ModelSpec model_from_shapes(const ppfl::numkit::ParamVector& w,
                                          ppfl::numkit::Activation activation) {
  const auto& shapes = w.shapes;
  ppfl::numkit::ModelSpec spec;
  if (shapes.size() == 1) {
    spec.kind = ppfl::numkit::ModelKind::SoftmaxRegression;
    spec.num_classes = shapes[0].rows;
    spec.input_dim = shapes[0].cols;
    return spec;
  }
  if (shapes.size() == 4) {
    spec.kind = ppfl::numkit::ModelKind::MlpOneHidden;
    spec.hidden_dim = shapes[0].rows;
    spec.input_dim = shapes[0].cols;
    spec.num_classes = shapes[2].rows;
    spec.activation = activation;
    return spec;
  }
  throw ppfl::FormatError("snapshot: unrecognized parameter block structure");
}

void report_attack(const ppfl::attack::AttackResult& res, const ppfl::numkit::Matrix& truth,
                   double diameter, int client) {
  const auto boxed = ppfl::metrics::clamp_to_range(res.final_estimate, 0.0, 1.0);
  const double recon_mse = ppfl::metrics::mse(boxed, truth.data);
  const double recon_ssim =
      ppfl::metrics::ssim_rows(boxed, truth.data, static_cast<std::size_t>(truth.cols), 1.0);
  const double leak = ppfl::attack::empirical_leakage(res.distances, diameter);
  std::cout << "client " << client << ": mse = " << ppfl::experiment::csv_double(recon_mse)
            << ", ssim = " << ppfl::experiment::csv_double(recon_ssim)
            << ", empirical_leakage = " << ppfl::experiment::csv_double(leak)
            << ", objective = " << ppfl::experiment::csv_double(res.final_objective) << "\n";
}

int cmd_attack(const GlobalArgs& args) {
  const auto cfg = load_effective(args);
  std::cout << ppfl::config::echo_config(cfg);

  if (!args.snapshot_path.empty()) {
    const auto snap = ppfl::snapshot::load_round(args.snapshot_path);
    const auto spec = model_from_shapes(snap.w_prev, cfg.model.activation);
    const auto g_obs =
        ppfl::attack::observed_gradient_from_update(snap.w_prev, snap.w_upload, snap.eta);
    ppfl::attack::AttackConfig acfg = cfg.attack.cfg;
    acfg.init_seed = ppfl::RngStream::derive(cfg.seed, 0xa77ac4ull, 1).next_u64();
    const auto res = ppfl::attack::invert_gradient_batch(g_obs, snap.w_prev, snap.batch.labels,
                                                         spec, acfg, &snap.batch.inputs);
    report_attack(res, snap.batch.inputs, cfg.constants.data_diameter, 0);
    return kExitOk;
  }

  // No snapshot given: train up to the attack round, capture the uploads,
  // write them out as snapshots, then attack each one.
  ppfl::config::ExperimentConfig run_cfg = cfg;
  run_cfg.capture_round = cfg.attack.round;
  auto setup = ppfl::experiment::prepare_run(run_cfg, cfg.seed, cfg.mechanism, cfg.protect,
                                             single_budget(cfg));
  const auto traj = ppfl::federation::run_training(setup.fed, setup.clients, setup.test_inputs,
                                                   setup.test_labels);
  if (traj.captures.empty()) {
    throw ppfl::ConfigError("attack: no captures; attack.round must be within [1, rounds]");
  }
  std::filesystem::create_directories(cfg.output_dir);
  for (const auto& cap : traj.captures) {
    ppfl::snapshot::RoundSnapshot snap;
    snap.w_prev = cap.w_prev;
    snap.w_upload = cap.w_upload;
    snap.eta = cfg.eta;
    snap.batch = cap.batch;
    snap.meta = {{"round", std::to_string(cap.round)},
                 {"client", std::to_string(cap.client)},
                 {"mechanism", ppfl::config::mechanism_name(cfg.mechanism, cfg.protect)}};
    const std::string path = cfg.output_dir + "/snapshot_r" + std::to_string(cap.round) + "_c" +
                             std::to_string(cap.client) + ".bin";
    ppfl::snapshot::save_round(path, snap);
    std::cout << "snapshot = " << path << "\n";

    const auto g_obs =
        ppfl::attack::observed_gradient_from_update(cap.w_prev, cap.w_upload, cfg.eta);
    ppfl::attack::AttackConfig acfg = cfg.attack.cfg;
    acfg.init_seed =
        ppfl::RngStream::derive(cfg.seed, 0xa77ac4ull, static_cast<std::uint64_t>(cap.client) + 1)
            .next_u64();
    const auto res = ppfl::attack::invert_gradient_batch(g_obs, cap.w_prev, cap.batch.labels,
                                                         setup.model, acfg, &cap.batch.inputs);
    report_attack(res, cap.batch.inputs, cfg.constants.data_diameter, cap.client);
  }
  return kExitOk;
}

int cmd_verify_theory(const GlobalArgs& args) {
  const auto cfg = load_effective(args);
  std::cout << ppfl::config::echo_config(cfg);

  ppfl::theory::TheoryReport report = ppfl::theory::verify_near_optimality(cfg.theory);

  // End-to-end convergence check on the configured run; needs the per-round
  // optimal-distortion oracle.
  if (cfg.oracle_samples > 0) {
    ppfl::config::ExperimentConfig run_cfg = cfg;
    auto setup = ppfl::experiment::prepare_run(run_cfg, cfg.seed, cfg.mechanism, cfg.protect,
                                               single_budget(cfg));
    const auto traj = ppfl::federation::run_training(setup.fed, setup.clients, setup.test_inputs,
                                                     setup.test_labels);

    // Pool the client shards back together for the smoothness probe.
    int total_rows = 0;
    for (const auto& c : setup.clients) total_rows += c.inputs.rows;
    ppfl::numkit::Matrix inputs(total_rows, setup.clients[0].inputs.cols);
    ppfl::numkit::Matrix labels(total_rows, setup.clients[0].labels.cols);
    int row = 0;
    for (const auto& c : setup.clients) {
      for (int r = 0; r < c.inputs.rows; ++r, ++row) {
        for (int j = 0; j < inputs.cols; ++j) inputs.at(row, j) = c.inputs.at(r, j);
        for (int j = 0; j < labels.cols; ++j) labels.at(row, j) = c.labels.at(r, j);
      }
    }
    double shell_upper = 0.0;
    for (const auto& rec : traj.rounds) {
      for (const auto& c : rec.clients) shell_upper = std::max(shell_upper, c.shell_upper);
    }
    ppfl::numkit::ParamVector center = traj.final_params;
    const double radius = traj.max_param_drift + shell_upper + 1e-6;
    auto probe = ppfl::theory::probe_smoothness(setup.model, inputs, labels, center, radius, 200,
                                                cfg.seed ^ 0x9e0beull);
    const auto convergence = ppfl::theory::verify_convergence_bound(traj, probe, cfg.eta);
    for (const auto& row_ : convergence.rows) report.rows.push_back(row_);
    report.passed = report.passed && convergence.passed;
  }

  std::filesystem::create_directories(cfg.output_dir);
  ppfl::experiment::write_theory_csv(cfg.output_dir + "/theory_report.csv", report);

  int failures = 0;
  for (const auto& row : report.rows) {
    if (!row.pass) {
      ++failures;
      std::cout << "FAIL " << row.check << " round=" << row.round << " client=" << row.client
                << " observed=" << ppfl::experiment::csv_double(row.observed)
                << " bound=" << ppfl::experiment::csv_double(row.bound) << "\n";
    }
  }
  std::cout << "theory_checks = " << report.rows.size() << "\n"
            << "theory_failures = " << failures << "\n"
            << "theory_report_csv = " << cfg.output_dir << "/theory_report.csv\n";
  return report.passed ? kExitOk : kExitAssertion;
}

int cmd_estimate_constants(const GlobalArgs& args) {
  const auto cfg = load_effective(args);
  std::cout << ppfl::config::echo_config(cfg);

  auto setup = ppfl::experiment::prepare_run(cfg, cfg.seed, cfg.mechanism, cfg.protect,
                                             cfg.budgets.empty() ? 0.0 : cfg.budgets.front());
  int total_rows = 0;
  for (const auto& c : setup.clients) total_rows += c.inputs.rows;
  ppfl::numkit::Matrix inputs(total_rows, setup.clients[0].inputs.cols);
  ppfl::numkit::Matrix labels(total_rows, setup.clients[0].labels.cols);
  int row = 0;
  for (const auto& c : setup.clients) {
    for (int r = 0; r < c.inputs.rows; ++r, ++row) {
      for (int j = 0; j < inputs.cols; ++j) inputs.at(row, j) = c.inputs.at(r, j);
      for (int j = 0; j < labels.cols; ++j) labels.at(row, j) = c.labels.at(r, j);
    }
  }

  const auto models = ppfl::attack::prepare_models(setup.model, inputs, labels,
                                                   cfg.estimate.models, cfg.estimate.local_steps,
                                                   cfg.eta, cfg.batch_size, cfg.seed);

  // The candidate set the attacker scores against: the first client batch.
  const int s = std::min(cfg.batch_size, setup.clients[0].inputs.rows);
  ppfl::numkit::Batch target;
  target.inputs = ppfl::numkit::Matrix(s, inputs.cols);
  target.labels = ppfl::numkit::Matrix(s, labels.cols);
  for (int r = 0; r < s; ++r) {
    for (int j = 0; j < inputs.cols; ++j) target.inputs.at(r, j) = setup.clients[0].inputs.at(r, j);
    for (int j = 0; j < labels.cols; ++j) target.labels.at(r, j) = setup.clients[0].labels.at(r, j);
  }

  ppfl::attack::AttackConfig acfg = cfg.attack.cfg;
  acfg.init_seed = cfg.seed;
  const auto freq = ppfl::attack::recovery_frequency(models, setup.model, target, cfg.eta,
                                                     cfg.estimate.attempts,
                                                     cfg.estimate.threshold,
                                                     cfg.estimate.similarity, acfg);

  const double kappa2 = 1.0 / cfg.estimate.prior_classes;
  std::vector<double> kappa1(static_cast<std::size_t>(s), 0.0);
  std::vector<double> kappa3(static_cast<std::size_t>(s), 0.0);
  for (int d = 0; d < s; ++d) {
    for (std::size_t m = 0; m < freq.size(); ++m) {
      kappa1[static_cast<std::size_t>(d)] += freq[m][static_cast<std::size_t>(d)];
      kappa3[static_cast<std::size_t>(d)] =
          std::max(kappa3[static_cast<std::size_t>(d)], freq[m][static_cast<std::size_t>(d)]);
    }
    kappa1[static_cast<std::size_t>(d)] /= static_cast<double>(freq.size());
  }
  // Never-recovered data get half the smallest resolvable count; the
  // divergence estimators require strictly positive beliefs.
  const double kappa_floor =
      0.5 / (static_cast<double>(s) * cfg.estimate.attempts * static_cast<double>(freq.size()));
  for (double& k : kappa1) k = std::max(k, kappa_floor);
  for (double& k : kappa3) k = std::max(k, kappa_floor);
  const auto constants = ppfl::attack::bayesian_constants(kappa1, kappa2, kappa3);

  double kappa1_mean = 0.0, kappa3_max = 0.0;
  for (double k : kappa1) kappa1_mean += k;
  kappa1_mean /= static_cast<double>(kappa1.size());
  for (double k : kappa3) kappa3_max = std::max(kappa3_max, k);

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/constants.csv", std::ios::trunc);
  if (!out) throw ppfl::ConfigError("estimate-constants: cannot write constants.csv");
  out << "constant,value\n";
  out << "c1," << ppfl::experiment::csv_double(constants.c1) << "\n";
  out << "c2," << ppfl::experiment::csv_double(constants.c2) << "\n";
  out << "kappa2," << ppfl::experiment::csv_double(kappa2) << "\n";
  out << "kappa1_mean," << ppfl::experiment::csv_double(kappa1_mean) << "\n";
  out << "kappa3_max," << ppfl::experiment::csv_double(kappa3_max) << "\n";

  std::cout << "c1 = " << ppfl::experiment::csv_double(constants.c1) << "\n"
            << "c2 = " << ppfl::experiment::csv_double(constants.c2) << "\n"
            << "constants_csv = " << cfg.output_dir << "/constants.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-distortion federated learning experiment runner"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Path to the JSON experiment config")
      ->required();
  app.add_option("--seed", args.seed_override, "Override the config seed");
  app.add_option("--out", args.out_override, "Override the config output directory");

  CLI::App* train = app.add_subcommand("train", "One federated training run, emits rounds.csv");
  CLI::App* sweep =
      app.add_subcommand("sweep", "Budget sweep over mechanisms, emits tradeoff.csv and cap.csv");
  CLI::App* attack = app.add_subcommand(
      "attack", "Gradient-inversion attack against captured or snapshotted uploads");
  attack->add_option("--snapshot", args.snapshot_path, "Replay a saved round snapshot");
  CLI::App* verify = app.add_subcommand(
      "verify-theory", "Near-optimality, contraction and convergence checks, emits theory_report.csv");
  CLI::App* estimate = app.add_subcommand(
      "estimate-constants", "Recovery-frequency simulation for the Bayesian constants");

  // Global flags are accepted on either side of the subcommand.
  for (CLI::App* sub : {train, sweep, attack, verify, estimate}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (attack->parsed()) return cmd_attack(args);
    if (verify->parsed()) return cmd_verify_theory(args);
    if (estimate->parsed()) return cmd_estimate_constants(args);
  } catch (const ppfl::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAssertion;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
