// Acceptance gate: every release criterion checked end to end, one verdict
// line per criterion.  Exits nonzero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ppfl/attack.hpp"
#include "ppfl/config.hpp"
#include "ppfl/experiment.hpp"
#include "ppfl/federation.hpp"
#include "ppfl/metrics.hpp"
#include "ppfl/numkit.hpp"
#include "ppfl/privacy.hpp"
#include "ppfl/rng.hpp"
#include "ppfl/theory.hpp"

namespace fs = std::filesystem;
using namespace ppfl;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("unexpected exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "%.1f", secs);
  std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << " (" << name
            << "): " << out.detail << " [" << stamp << "s]" << std::endl;
  if (!out.pass) ++g_failures;
}

std::string fmt(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return res;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) res.output += buf.data();
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

numkit::ParamVector random_normal(std::size_t dim, double scale, RngStream& rng) {
  numkit::ParamVector v = numkit::ParamVector::zeros(dim);
  for (double& x : v.data) x = scale * rng.normal();
  return v;
}

// Shared verifier for the shipped end-to-end runs: trains the configured
// federation with the per-round optimal-distortion oracle on, probes the
// smoothness constants around the visited region, and checks the averaged
// squared-gradient-norm bound.
struct ShippedRunCheck {
  bool passed = false;
  double observed = 0.0;
  double bound = 0.0;
  double seconds = 0.0;
  federation::Trajectory trajectory;
};

ShippedRunCheck check_shipped_run(const std::string& config_path) {
  const auto t0 = Clock::now();
  ShippedRunCheck out;
  const auto cfg = config::load_config(config_path);
  auto setup =
      experiment::prepare_run(cfg, cfg.seed, cfg.mechanism, cfg.protect, cfg.budgets.front());
  out.trajectory =
      federation::run_training(setup.fed, setup.clients, setup.test_inputs, setup.test_labels);

  int total_rows = 0;
  for (const auto& c : setup.clients) total_rows += c.inputs.rows;
  numkit::Matrix inputs(total_rows, setup.clients[0].inputs.cols);
  numkit::Matrix labels(total_rows, setup.clients[0].labels.cols);
  int row = 0;
  for (const auto& c : setup.clients) {
    for (int r = 0; r < c.inputs.rows; ++r, ++row) {
      for (int j = 0; j < inputs.cols; ++j) inputs.at(row, j) = c.inputs.at(r, j);
      for (int j = 0; j < labels.cols; ++j) labels.at(row, j) = c.labels.at(r, j);
    }
  }
  double shell_upper = 0.0;
  for (const auto& rec : out.trajectory.rounds) {
    for (const auto& c : rec.clients) shell_upper = std::max(shell_upper, c.shell_upper);
  }
  const double radius = out.trajectory.max_param_drift + shell_upper + 1e-6;
  const auto probe = theory::probe_smoothness(setup.model, inputs, labels,
                                              out.trajectory.final_params, radius, 200,
                                              cfg.seed ^ 0x9e0beull);
  const auto report = theory::verify_convergence_bound(out.trajectory, probe, cfg.eta);
  out.passed = report.passed && report.rows.size() == 1;
  if (!report.rows.empty()) {
    out.observed = report.rows.front().observed;
    out.bound = report.rows.front().bound;
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace

int main() {
  std::cout << "acceptance gate\n";
  const std::string configs = CONFIGS_DIR;
  const std::string bin = XPRUNNER_BIN;
  const fs::path work = fs::temp_directory_path() / "ppfl_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  // State shared between dependent criteria.
  std::vector<federation::Trajectory> shipped_trajectories;
  std::optional<experiment::SweepResult> pl_sweep;
  std::optional<experiment::SweepResult> dp_sweep;

  run_criterion(1, "shell-projected descent contracts", [&]() -> Outcome {
    const auto t0 = Clock::now();
    theory::TheoryReport report;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto problem = theory::QuadraticProblem::random(
          6, 1.0, 4.0, 1.5, 900 + static_cast<std::uint64_t>(i));
      theory::check_contraction(problem, 1.0, 8, report, i);
    }
    for (const auto& row : report.rows) worst = std::max(worst, row.observed - row.bound);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    Outcome out;
    out.pass = report.passed && report.rows.size() == 20 && secs < 1.0;
    out.detail = "20 random strongly convex quadratics, per-step squared-distance ratio vs "
                 "1 - R/L, worst margin " + fmt(worst);
    if (secs >= 1.0) out.detail += " (over the 1 s limit)";
    return out;
  });

  run_criterion(2, "learned distortion is near optimal", [&]() -> Outcome {
    const auto t0 = Clock::now();
    const auto report = theory::verify_near_optimality(theory::NearOptimalityConfig{});
    double worst = -1e300;
    int gap_rows = 0;
    for (const auto& row : report.rows) {
      if (row.check == "near_optimal_gap") {
        ++gap_rows;
        worst = std::max(worst, row.observed - row.bound);
      }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    Outcome out;
    out.pass = report.passed && gap_rows == 40 && secs < 30.0;
    out.detail = "4 clients x 10 rounds vs brute-force shell oracle, " +
                 std::to_string(report.rows.size()) + " checks, worst gap margin " + fmt(worst);
    if (secs >= 30.0) out.detail += " (over the 30 s limit)";
    return out;
  });

  run_criterion(3, "convergence bound holds on shipped runs", [&]() -> Outcome {
    Outcome out;
    out.pass = true;
    bool first = true;
    for (const std::string name : {"train_blobs_pl.json", "train_blobs_dp.json"}) {
      const auto check = check_shipped_run(configs + "/" + name);
      shipped_trajectories.push_back(check.trajectory);
      out.pass = out.pass && check.passed && check.seconds < 60.0;
      if (!first) out.detail += "; ";
      out.detail += name.substr(12, 2) + ": mean (eta/2)||grad||^2 " + fmt(check.observed) +
                    " <= " + fmt(check.bound) + " in " + fmt(check.seconds) + "s";
      first = false;
    }
    return out;
  });

  run_criterion(4, "gradient inner-product identity", [&]() -> Outcome {
    auto rng = RngStream::derive(31337, 0, 0);
    double worst_random = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t dim = 3 + rng.below(38);
      const int parts = 1 + static_cast<int>(rng.below(6));
      const auto a = random_normal(dim, 1.0, rng);
      std::vector<numkit::ParamVector> bs;
      std::vector<double> weights;
      double weight_sum = 0.0;
      for (int k = 0; k < parts; ++k) {
        bs.push_back(random_normal(dim, 1.0, rng));
        weights.push_back(rng.uniform_open());
        weight_sum += weights.back();
      }
      for (double& w : weights) w /= weight_sum;
      auto aggregate = numkit::ParamVector::zeros(dim);
      double rhs = 0.5 * numkit::dot(a, a);
      for (int k = 0; k < parts; ++k) {
        aggregate += weights[static_cast<std::size_t>(k)] * bs[static_cast<std::size_t>(k)];
        const auto diff = a - bs[static_cast<std::size_t>(k)];
        rhs += weights[static_cast<std::size_t>(k)] *
               (0.5 * numkit::dot(bs[static_cast<std::size_t>(k)], bs[static_cast<std::size_t>(k)]) -
                0.5 * numkit::dot(diff, diff));
      }
      worst_random = std::max(worst_random, std::abs(numkit::dot(a, aggregate) - rhs));
    }

    double worst_live = shipped_trajectories.empty() ? 1.0 : 0.0;
    for (const auto& traj : shipped_trajectories) {
      for (const auto& rec : traj.rounds) worst_live = std::max(worst_live, rec.identity_residual);
    }
    Outcome out;
    out.pass = worst_random <= 1e-9 && worst_live <= 1e-9 && !shipped_trajectories.empty();
    out.detail = "1000 random instances, worst residual " + fmt(worst_random) +
                 "; live rounds from both shipped runs, worst " + fmt(worst_live);
    return out;
  });

  run_criterion(5, "budget inversion round-trips", [&]() -> Outcome {
    const privacy::PrivacyConstants consts;
    const double intercept =
        1.0 - consts.c_a * consts.c_0 *
                  std::pow(static_cast<double>(consts.attack_rounds), consts.p - 1.0) /
                  (2.0 * consts.data_diameter);
    auto rng = RngStream::derive(515, 0, 0);
    double worst_pl = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const double chi = rng.uniform() * intercept;
      worst_pl = std::max(worst_pl,
                          std::abs(privacy::leakage_pl(privacy::invert_budget_pl(chi, consts),
                                                       consts) - chi));
    }
    privacy::DpParams dp;
    dp.dim = 32;
    double worst_dp = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const double chi = rng.uniform_open() * 1e4;
      worst_dp = std::max(worst_dp,
                          std::abs(privacy::leakage_dp(privacy::invert_budget_dp(chi, dp), dp) -
                                   chi));
    }
    Outcome out;
    out.pass = worst_pl <= 1e-10 && worst_dp <= 1e-10;
    out.detail = "1000 budgets per framework, worst |leakage(invert(chi)) - chi|: "
                 "distribution-free " + fmt(worst_pl) + ", laplacian " + fmt(worst_dp);
    return out;
  });

  run_criterion(6, "zero-distortion inversion fidelity", [&]() -> Outcome {
    const auto t0 = Clock::now();
    numkit::ModelSpec spec;
    spec.kind = numkit::ModelKind::SoftmaxRegression;
    spec.input_dim = 8;
    spec.num_classes = 4;
    double worst_mse = 0.0;
    double worst_coord_gap = 0.0;
    int recovered = 0;
    for (int i = 0; i < 50; ++i) {
      auto rng = RngStream::derive(777, static_cast<std::uint64_t>(i), 0);
      const auto w = random_normal(spec.param_count(), 0.1, rng);
      numkit::Batch batch;
      batch.inputs = numkit::Matrix(1, spec.input_dim);
      batch.labels = numkit::Matrix(1, spec.num_classes);
      for (int j = 0; j < spec.input_dim; ++j) batch.inputs.at(0, j) = rng.uniform();
      const int cls = static_cast<int>(rng.below(4));
      batch.labels.at(0, cls) = 1.0;
      const auto g_obs = numkit::backward(spec, w, batch);

      attack::AttackConfig acfg;
      acfg.init_seed = RngStream::derive(777, static_cast<std::uint64_t>(i), 1).next_u64();
      // The attacker knows the input domain and starts inside it; a wild
      // start can run into saturated softmax regions where the objective
      // gradient vanishes.
      auto init_rng = RngStream(acfg.init_seed);
      std::vector<double> x_init(static_cast<std::size_t>(spec.input_dim));
      for (double& v : x_init) v = init_rng.uniform();
      const std::vector<double> onehot(batch.labels.data);
      const auto res = attack::invert_gradient(g_obs, w, onehot, spec, acfg, nullptr, &x_init);
      worst_mse = std::max(worst_mse, metrics::mse(res.final_estimate, batch.inputs.data));

      const auto cf = attack::closed_form_recover_linear(g_obs, w, onehot, spec);
      if (cf.status == attack::RecoveryStatus::Recovered) ++recovered;
      for (std::size_t j = 0; j < res.final_estimate.size(); ++j) {
        worst_coord_gap =
            std::max(worst_coord_gap, std::abs(res.final_estimate[j] - cf.x[j]));
      }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    Outcome out;
    out.pass = worst_mse <= 1e-3 && worst_coord_gap <= 1e-3 && recovered == 50 && secs < 60.0;
    out.detail = "50 instances at 1600 iterations, worst reconstruction mse " + fmt(worst_mse) +
                 ", worst per-coordinate gap to the closed form " + fmt(worst_coord_gap);
    if (secs >= 60.0) out.detail += " (over the 60 s limit)";
    return out;
  });

  run_criterion(7, "utility ordering across the budget sweep", [&]() -> Outcome {
    const auto t0 = Clock::now();
    Outcome out;
    out.pass = true;
    bool first = true;
    for (const std::string name : {"sweep_blobs_pl.json", "sweep_blobs_dp.json"}) {
      const auto cfg = config::load_config(configs + "/" + name);
      const auto result =
          experiment::run_sweep(cfg, (work / ("sweep_" + name.substr(12, 2))).string());
      const bool is_dp = name.find("dp") != std::string::npos;
      if (is_dp) {
        dp_sweep = result;
      } else {
        pl_sweep = result;
      }

      // rows come out budget-major with the learner variant first.
      std::vector<double> budgets, learn_acc, ident_acc;
      for (const auto& row : result.rows) {
        const bool learner = row.mechanism == distortion::MechanismKind::PlLearn ||
                             row.mechanism == distortion::MechanismKind::DpLearn;
        if (learner) {
          budgets.push_back(row.budget);
          learn_acc.push_back(row.accuracy);
        } else {
          ident_acc.push_back(row.accuracy);
        }
      }
      double min_gap = 1e300;
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        min_gap = std::min(min_gap, learn_acc[b] - ident_acc[b]);
      }
      const double tightest_gap = learn_acc.front() - ident_acc.front();
      const double rho_learn = spearman_rho(budgets, learn_acc);
      const double rho_ident = spearman_rho(budgets, ident_acc);
      const bool ok = budgets.size() == 5 && min_gap >= -0.005 && tightest_gap > 0.0 &&
                      rho_learn >= 0.9 && rho_ident >= 0.9;
      out.pass = out.pass && ok;
      if (!first) out.detail += "; ";
      out.detail += name.substr(12, 2) + ": min acc gap " + fmt(min_gap) + ", tightest " +
                    fmt(tightest_gap) + ", rho " + fmt(rho_learn) + "/" + fmt(rho_ident);
      first = false;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    out.pass = out.pass && secs < 600.0;
    if (secs >= 600.0) out.detail += " (over the 10 min limit)";
    return out;
  });

  run_criterion(8, "composite accuracy-protection ordering", [&]() -> Outcome {
    Outcome out;
    if (!pl_sweep || !dp_sweep) {
      out.detail = "sweep results unavailable";
      return out;
    }
    out.pass = true;
    bool first = true;
    for (const auto* sweep : {&*pl_sweep, &*dp_sweep}) {
      double learn = 0.0, ident = 0.0;
      for (const auto& [mech, value] : sweep->cap_rows) {
        if (mech == distortion::MechanismKind::PlLearn ||
            mech == distortion::MechanismKind::DpLearn) {
          learn = value;
        } else {
          ident = value;
        }
      }
      out.pass = out.pass && learn > ident;
      out.detail += std::string(first ? "" : "; ") + (first ? "pl" : "dp") + ": learn " +
                    fmt(learn) + " vs identical " + fmt(ident);
      first = false;
    }
    return out;
  });

  run_criterion(9, "reconstruction parity between variants", [&]() -> Outcome {
    Outcome out;
    if (!dp_sweep) {
      out.detail = "sweep results unavailable";
      return out;
    }
    // Per budget: difference of seed means between the variants, against the
    // seed scatter pooled across the two variants.
    std::vector<double> gaps_mse, stds_mse, gaps_ssim, stds_ssim;
    std::vector<double> budgets;
    for (const auto& cell : dp_sweep->cells) {
      if (std::find(budgets.begin(), budgets.end(), cell.budget) == budgets.end()) {
        budgets.push_back(cell.budget);
      }
    }
    for (double budget : budgets) {
      std::vector<double> learn_mse, ident_mse, learn_ssim, ident_ssim;
      for (const auto& cell : dp_sweep->cells) {
        if (cell.budget != budget) continue;
        if (cell.mechanism == distortion::MechanismKind::DpLearn) {
          learn_mse.push_back(cell.recon_mse);
          learn_ssim.push_back(cell.recon_ssim);
        } else {
          ident_mse.push_back(cell.recon_mse);
          ident_ssim.push_back(cell.recon_ssim);
        }
      }
      const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      };
      const auto sample_var = [&](const std::vector<double>& v) {
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
      };
      gaps_mse.push_back(mean(learn_mse) - mean(ident_mse));
      stds_mse.push_back(std::sqrt(0.5 * (sample_var(learn_mse) + sample_var(ident_mse))));
      gaps_ssim.push_back(mean(learn_ssim) - mean(ident_ssim));
      stds_ssim.push_back(std::sqrt(0.5 * (sample_var(learn_ssim) + sample_var(ident_ssim))));
    }
    const auto mean_of = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const double mse_gap = std::abs(mean_of(gaps_mse));
    const double mse_std = mean_of(stds_mse);
    const double ssim_gap = std::abs(mean_of(gaps_ssim));
    const double ssim_std = mean_of(stds_ssim);
    out.pass = budgets.size() == 5 && mse_gap <= 0.5 * mse_std && ssim_gap <= 0.5 * ssim_std;
    out.detail = "|mean mse gap| " + fmt(mse_gap) + " <= " + fmt(0.5 * mse_std) +
                 ", |mean ssim gap| " + fmt(ssim_gap) + " <= " + fmt(0.5 * ssim_std);
    return out;
  });

  run_criterion(10, "byte-identical reruns of every subcommand", [&]() -> Outcome {
    const fs::path dir = work / "determinism";
    fs::create_directories(dir);
    const std::string tiny_dataset =
        R"("dataset": {"classes": 2, "dim": 4, "per_class": 4, "test_per_class": 5})";
    const struct {
      const char* name;
      std::string config;
      std::vector<const char*> files;
    } cases[] = {
        {"train",
         R"({"seed": 7, "rounds": 5, "clients": 2, "batch_size": 2, "eta": 0.3,
             "mechanism": "pl-learn", "budget": 0.6, )" + tiny_dataset + "}",
         {"rounds.csv"}},
        {"sweep",
         R"({"seed": 11, "rounds": 3, "clients": 2, "batch_size": 2, "eta": 0.3,
             "mechanism": "pl-identical", "budgets": [0.6], "sweep": {"seeds": 2},
             "attack": {"iterations": 80, "round": 3, "keep_every": 40}, )" + tiny_dataset + "}",
         {"tradeoff.csv", "cap.csv"}},
        {"attack",
         R"({"seed": 3, "rounds": 1, "clients": 2, "batch_size": 2, "eta": 0.5,
             "mechanism": "pl-identical", "budget": 0.6,
             "attack": {"iterations": 100, "round": 1, "keep_every": 50}, )" + tiny_dataset + "}",
         {"snapshot_r1_c0.bin", "snapshot_r1_c1.bin"}},
        {"verify-theory",
         R"({"seed": 2, "rounds": 1, "mechanism": "none",
             "theory": {"clients": 2, "rounds": 2, "dim": 3,
                        "oracle_samples": 2000, "oracle_refine_steps": 20}})",
         {"theory_report.csv"}},
        {"estimate-constants",
         R"({"seed": 5, "rounds": 1, "clients": 2, "batch_size": 1, "eta": 0.5,
             "mechanism": "none", "attack": {"iterations": 200},
             "estimate": {"models": 2, "local_steps": 40, "attempts": 1,
                          "threshold": -0.001, "similarity": "neg-mse",
                          "prior_classes": 50}, )" + tiny_dataset + "}",
         {"constants.csv"}},
    };
    Outcome out;
    out.pass = true;
    int files_compared = 0;
    for (const auto& c : cases) {
      const fs::path cfg_path = dir / (std::string(c.name) + ".json");
      std::ofstream(cfg_path) << c.config;
      const fs::path out_a = dir / (std::string(c.name) + "_a");
      const fs::path out_b = dir / (std::string(c.name) + "_b");
      const std::string base =
          bin + " " + c.name + " --config " + cfg_path.string() + " --out ";
      const auto first = run_cmd(base + out_a.string());
      const auto second = run_cmd(base + out_b.string());
      bool ok = first.exit_code == 0 && second.exit_code == 0;
      for (const char* file : c.files) {
        const std::string bytes_a = read_bytes(out_a / file);
        ok = ok && !bytes_a.empty() && bytes_a == read_bytes(out_b / file);
        ++files_compared;
      }
      out.pass = out.pass && ok;
      if (!ok) out.detail += std::string(" ") + c.name + " differs or failed;";
    }
    if (out.pass) {
      out.detail = "5 subcommands rerun, " + std::to_string(files_compared) +
                   " output files byte-identical";
    }
    return out;
  });

  run_criterion(11, "metric unit values are exact", [&]() -> Outcome {
    const std::vector<double> a = {0.1, 0.4, 0.7, 0.2, 0.9};
    const bool ssim_one = metrics::ssim(a, a, 1.0) == 1.0;
    const bool mse_zero = metrics::mse(a, a) == 0.0;
    const bool leak_one = attack::empirical_leakage({0.0, 0.0, 0.0}, 1.0) == 1.0;
    const bool leak_zero = attack::empirical_leakage({}, 1.0) == 0.0;
    Outcome out;
    out.pass = ssim_one && mse_zero && leak_one && leak_zero;
    out.detail = "ssim(a,a)=1, mse(a,a)=0, leakage(zero distances)=1, leakage(no attack)=0";
    return out;
  });

  std::cout << "acceptance: " << (11 - g_failures) << "/11 criteria passed" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
