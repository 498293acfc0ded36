#include "ppfl/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ppfl/attack.hpp"
#include "ppfl/rng.hpp"

namespace ppfl::experiment {

using config::DatasetKind;
using config::ExperimentConfig;
using distortion::MechanismKind;
using federation::ClientState;
using federation::RoundCapture;
using federation::Trajectory;

namespace {

bool is_dp(MechanismKind kind) {
  return kind == MechanismKind::DpLearn || kind == MechanismKind::DpIdentical;
}

dataset::Dataset build_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.dataset.kind == DatasetKind::SyntheticBlobs) {
    dataset::BlobConfig b;
    b.classes = cfg.dataset.classes;
    b.dim = cfg.dataset.dim;
    b.per_class = cfg.dataset.per_class;
    b.sigma = cfg.dataset.sigma;
    b.mean_scale = cfg.dataset.mean_scale;
    b.seed = seed;
    return dataset::synth_blobs(b);
  }
  return dataset::load_idx(cfg.dataset.images, cfg.dataset.labels, cfg.dataset.downsample);
}

dataset::Dataset build_test(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.dataset.kind == DatasetKind::SyntheticBlobs) {
    dataset::BlobConfig b;
    b.classes = cfg.dataset.classes;
    b.dim = cfg.dataset.dim;
    b.per_class = cfg.dataset.test_per_class;
    b.sigma = cfg.dataset.sigma;
    b.mean_scale = cfg.dataset.mean_scale;
    b.seed = RngStream::derive(seed, 0x7e57ull, 1).next_u64();
    return dataset::synth_blobs(b);
  }
  return dataset::load_idx(cfg.dataset.test_images, cfg.dataset.test_labels,
                           cfg.dataset.downsample);
}

}  // namespace

RunSetup prepare_run(const ExperimentConfig& cfg, std::uint64_t seed, MechanismKind mechanism,
                     bool protect, double chi) {
  RunSetup setup;
  const dataset::Dataset train = build_train(cfg, seed);
  const dataset::Dataset test = build_test(cfg, seed);
  setup.model = config::materialize_model(cfg.model, train.inputs.cols, train.labels.cols);

  const privacy::Framework framework =
      is_dp(mechanism) ? privacy::Framework::LaplacianDp : privacy::Framework::DistributionFree;
  const auto shards = dataset::split_even(train, cfg.clients);
  for (int k = 0; k < cfg.clients; ++k) {
    ClientState client;
    client.id = k;
    client.inputs = shards[static_cast<std::size_t>(k)].inputs;
    client.labels = shards[static_cast<std::size_t>(k)].labels;
    client.budget_schedule = {privacy::PrivacyBudget{chi, framework}};
    setup.clients.push_back(std::move(client));
  }
  setup.test_inputs = test.inputs;
  setup.test_labels = test.class_ids();

  setup.fed.model = setup.model;
  setup.fed.rounds = cfg.rounds;
  setup.fed.batch_size = cfg.batch_size;
  setup.fed.eta = cfg.eta;
  setup.fed.clip_norm = cfg.clip_norm;
  setup.fed.protect = protect;
  setup.fed.mechanism = mechanism;
  setup.fed.constants = cfg.constants;
  setup.fed.learner = cfg.learner;
  setup.fed.seed = seed;
  setup.fed.init_scale = cfg.init_scale;
  setup.fed.capture_round = cfg.capture_round;
  setup.fed.oracle_samples = cfg.oracle_samples;
  setup.fed.oracle_refine_steps = cfg.oracle_refine_steps;
  return setup;
}

AttackOutcome attack_captures(const std::vector<RoundCapture>& captures,
                              const numkit::ModelSpec& model, const ExperimentConfig& cfg,
                              std::uint64_t run_seed) {
  AttackOutcome out;
  if (captures.empty()) return out;

  for (const RoundCapture& cap : captures) {
    const numkit::ParamVector g_obs =
        attack::observed_gradient_from_update(cap.w_prev, cap.w_upload, cfg.eta);
    attack::AttackConfig acfg = cfg.attack.cfg;
    acfg.init_seed =
        RngStream::derive(run_seed, 0xa77ac4ull, static_cast<std::uint64_t>(cap.client) + 1)
            .next_u64();
    const attack::AttackResult res = attack::invert_gradient_batch(
        g_obs, cap.w_prev, cap.batch.labels, model, acfg, &cap.batch.inputs);

    // Reconstructions are scored inside the feature domain: an attacker who
    // knows the input range projects onto it for free.
    const auto boxed = metrics::clamp_to_range(res.final_estimate, 0.0, 1.0);
    out.recon_mse += metrics::mse(boxed, cap.batch.inputs.data);
    out.recon_ssim += metrics::ssim_rows(boxed, cap.batch.inputs.data,
                                         static_cast<std::size_t>(cap.batch.inputs.cols), 1.0);
    out.empirical_leakage +=
        attack::empirical_leakage(res.distances, cfg.constants.data_diameter);
    ++out.captures_attacked;
  }
  out.recon_mse /= out.captures_attacked;
  out.recon_ssim /= out.captures_attacked;
  out.empirical_leakage /= out.captures_attacked;
  return out;
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (cfg.budgets.empty()) throw ConfigError("sweep: at least one budget is required");
  if (cfg.sweep.seeds < 1) throw ConfigError("sweep: seeds must be >= 1");
  if (cfg.sweep.mechanisms.empty()) throw ConfigError("sweep: no mechanisms to sweep");

  std::filesystem::create_directories(out_dir);
  std::ofstream tradeoff(out_dir + "/tradeoff.csv", std::ios::trunc);
  if (!tradeoff) throw ConfigError("sweep: cannot write " + out_dir + "/tradeoff.csv");
  tradeoff << "budget,variant,accuracy,mean_utility_loss,mean_distortion_norm,mse,ssim,"
              "empirical_leakage\n";
  tradeoff.flush();

  ExperimentConfig run_cfg = cfg;
  // The attack replays the captured round, so captures must be on.
  run_cfg.capture_round = cfg.attack.round;

  SweepResult result;
  for (double budget : cfg.budgets) {
    for (MechanismKind mech : cfg.sweep.mechanisms) {
      SweepRow row;
      row.budget = budget;
      row.mechanism = mech;
      for (int s = 0; s < cfg.sweep.seeds; ++s) {
        const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(s);
        RunSetup setup = prepare_run(run_cfg, run_seed, mech, true, budget);
        const Trajectory traj = federation::run_training(setup.fed, setup.clients,
                                                         setup.test_inputs, setup.test_labels);
        const AttackOutcome atk =
            attack_captures(traj.captures, setup.model, run_cfg, run_seed);

        SweepCell cell;
        cell.budget = budget;
        cell.mechanism = mech;
        cell.seed = run_seed;
        cell.accuracy = traj.final_test_accuracy;
        cell.mean_utility_loss = traj.mean_utility_loss;
        cell.mean_distortion_norm = traj.mean_distortion_norm;
        cell.recon_mse = atk.recon_mse;
        cell.recon_ssim = atk.recon_ssim;
        cell.empirical_leakage = atk.empirical_leakage;
        result.cells.push_back(cell);

        row.accuracy += cell.accuracy;
        row.mean_utility_loss += cell.mean_utility_loss;
        row.mean_distortion_norm += cell.mean_distortion_norm;
        row.mse += cell.recon_mse;
        row.ssim += cell.recon_ssim;
        row.empirical_leakage += cell.empirical_leakage;
      }
      const double n = cfg.sweep.seeds;
      row.accuracy /= n;
      row.mean_utility_loss /= n;
      row.mean_distortion_norm /= n;
      row.mse /= n;
      row.ssim /= n;
      row.empirical_leakage /= n;
      result.rows.push_back(row);

      tradeoff << csv_double(row.budget) << ',' << config::mechanism_name(mech, true) << ','
               << csv_double(row.accuracy) << ',' << csv_double(row.mean_utility_loss) << ','
               << csv_double(row.mean_distortion_norm) << ',' << csv_double(row.mse) << ','
               << csv_double(row.ssim) << ',' << csv_double(row.empirical_leakage) << '\n';
      tradeoff.flush();
    }
  }

  std::ofstream capfile(out_dir + "/cap.csv", std::ios::trunc);
  if (!capfile) throw ConfigError("sweep: cannot write " + out_dir + "/cap.csv");
  capfile << "variant,cap\n";
  for (MechanismKind mech : cfg.sweep.mechanisms) {
    std::vector<metrics::SweepPoint> points;
    for (const SweepRow& row : result.rows) {
      if (row.mechanism != mech) continue;
      metrics::SweepPoint p;
      p.budget = row.budget;
      p.accuracy = row.accuracy;
      p.recovery_error = row.mse;
      p.leakage = row.empirical_leakage;
      p.mse = row.mse;
      p.ssim = row.ssim;
      points.push_back(p);
    }
    const double cap_value = metrics::cap(points);
    result.cap_rows.emplace_back(mech, cap_value);
    capfile << config::mechanism_name(mech, true) << ',' << csv_double(cap_value) << '\n';
    capfile.flush();
  }
  return result;
}

void write_rounds_csv(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("train: cannot write " + path);
  out << "round,client,chi,shell_lower,shell_upper,distortion_norm,utility_loss,train_loss,"
         "test_accuracy,global_loss,grad_norm_sq,agg_grad_norm,aggregate_distortion_norm,"
         "identity_residual,oracle_delta_norm_sq\n";
  for (const auto& rec : trajectory.rounds) {
    for (std::size_t k = 0; k < rec.clients.size(); ++k) {
      const auto& c = rec.clients[k];
      out << rec.round << ',' << k << ',' << csv_double(c.chi) << ','
          << csv_double(c.shell_lower) << ',' << csv_double(c.shell_upper) << ','
          << csv_double(c.distortion_norm) << ',' << csv_double(c.utility_loss) << ','
          << csv_double(c.train_loss) << ',' << csv_double(rec.test_accuracy) << ','
          << csv_double(rec.global_loss) << ',' << csv_double(rec.grad_norm_sq) << ','
          << csv_double(rec.agg_grad_norm) << ',' << csv_double(rec.aggregate_distortion_norm)
          << ',' << csv_double(rec.identity_residual) << ','
          << csv_double(rec.oracle_delta_norm_sq) << '\n';
    }
  }
}

void write_theory_csv(const std::string& path, const theory::TheoryReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("verify-theory: cannot write " + path);
  out << "check,round,client,observed,bound,pass\n";
  for (const auto& row : report.rows) {
    out << row.check << ',' << row.round << ',' << row.client << ',' << csv_double(row.observed)
        << ',' << csv_double(row.bound) << ',' << (row.pass ? 1 : 0) << '\n';
  }
}

}  // namespace ppfl::experiment
