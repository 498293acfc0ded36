#include "ppfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppfl/metrics.hpp"
#include "ppfl/rng.hpp"
#include "ppfl/theory.hpp"

namespace ppfl::federation {

using numkit::Batch;
using numkit::Matrix;
using numkit::ParamVector;

const privacy::PrivacyBudget& ClientState::budget_at(int round) const {
  if (budget_schedule.empty()) throw ParamError("client budget schedule is empty");
  if (budget_schedule.size() == 1) return budget_schedule.front();
  const std::size_t idx = static_cast<std::size_t>(round - 1);
  if (idx >= budget_schedule.size()) {
    throw ParamError("client budget schedule shorter than round " + std::to_string(round));
  }
  return budget_schedule[idx];
}

ParamVector local_step(const ParamVector& w, const ParamVector& grad, double eta,
                       std::optional<double> clip_norm) {
  if (!(eta > 0.0)) throw ParamError("local_step: eta must be positive");
  ParamVector g = clip_norm ? numkit::clip_gradient(grad, *clip_norm) : grad;
  g *= eta;
  ParamVector out = w;
  out -= g;
  return out;
}

ParamVector client_local_step(const numkit::ModelSpec& spec, const ParamVector& w,
                              const Batch& batch, double eta, std::optional<double> clip_norm) {
  return local_step(w, numkit::backward(spec, w, batch), eta, clip_norm);
}

ParamVector server_aggregate(const std::vector<ParamVector>& params,
                             const std::vector<double>& weights) {
  if (params.empty()) throw ParamError("server_aggregate: no client parameters");
  if (params.size() != weights.size()) {
    throw ShapeError("server_aggregate: weight count does not match client count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ParamError("server_aggregate: weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ParamError("server_aggregate: weights sum to zero");
  ParamVector out = ParamVector::zeros_like(params.front());
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != out.size()) {
      throw ShapeError("server_aggregate: client parameter lengths differ");
    }
    const double wk = weights[k] / total;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wk * params[k][i];
  }
  return out;
}

namespace {

Batch sample_batch(const ClientState& client, int batch_size, RngStream& rng) {
  const int n = client.inputs.rows;
  const int take = std::min(batch_size, n);
  std::vector<int> picked;
  picked.reserve(take);
  while (static_cast<int>(picked.size()) < take) {
    const int idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
  }
  Batch out;
  out.inputs = Matrix(take, client.inputs.cols);
  out.labels = Matrix(take, client.labels.cols);
  for (int r = 0; r < take; ++r) {
    for (int j = 0; j < client.inputs.cols; ++j) out.inputs.at(r, j) = client.inputs.at(picked[r], j);
    for (int j = 0; j < client.labels.cols; ++j) out.labels.at(r, j) = client.labels.at(picked[r], j);
  }
  return out;
}

Batch full_split(const ClientState& client) {
  Batch out;
  out.inputs = client.inputs;
  out.labels = client.labels;
  return out;
}

bool is_dp(distortion::MechanismKind kind) {
  return kind == distortion::MechanismKind::DpLearn ||
         kind == distortion::MechanismKind::DpIdentical;
}

}  // namespace

RoundResult run_round(const std::vector<ClientState>& clients, const ParamVector& w_prev,
                      int round, const FedConfig& cfg) {
  if (clients.empty()) throw ParamError("run_round: no clients");
  if (cfg.batch_size <= 0) throw ParamError("run_round: batch size must be positive");

  std::optional<double> clip = cfg.clip_norm;
  if (!clip && cfg.protect && is_dp(cfg.mechanism)) clip = privacy::DpParams{}.sensitivity;

  const std::size_t k_count = clients.size();
  std::vector<double> weights(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    weights[k] = static_cast<double>(clients[k].sample_count());
  }

  // Global full-split loss and gradient at the round's starting point.
  double global_loss = 0.0;
  ParamVector global_grad = ParamVector::zeros_like(w_prev);
  {
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) total += weights[k];
    for (std::size_t k = 0; k < k_count; ++k) {
      const Batch split = full_split(clients[k]);
      const double wk = weights[k] / total;
      global_loss += wk * numkit::forward_loss(cfg.model, w_prev, split);
      ParamVector g = numkit::backward(cfg.model, w_prev, split);
      g *= wk;
      global_grad += g;
    }
  }

  RoundResult out;
  out.record.round = round;
  out.record.global_loss = global_loss;
  out.record.grad_norm_sq = numkit::dot(global_grad, global_grad);
  out.record.clients.resize(k_count);

  std::vector<ParamVector> uploads;
  std::vector<ParamVector> locals;
  std::vector<ParamVector> batch_grads;
  uploads.reserve(k_count);
  locals.reserve(k_count);
  batch_grads.reserve(k_count);
  std::vector<Batch> batches(k_count);

  for (std::size_t k = 0; k < k_count; ++k) {
    const ClientState& client = clients[k];
    RngStream rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(client.id) + 1,
                                      static_cast<std::uint64_t>(round));
    batches[k] = sample_batch(client, cfg.batch_size, rng);

    ParamVector grad = numkit::backward(cfg.model, w_prev, batches[k]);
    if (clip) grad = numkit::clip_gradient(grad, *clip);
    batch_grads.push_back(grad);

    ParamVector local = w_prev;
    {
      ParamVector step = grad;
      step *= cfg.eta;
      local -= step;
    }

    ClientRoundStats& stats = out.record.clients[k];
    ParamVector delta = ParamVector::zeros_like(w_prev);
    if (cfg.protect) {
      const privacy::PrivacyBudget& budget = client.budget_at(round);
      privacy::DpParams dp;
      dp.eta = cfg.eta;
      dp.sensitivity = clip ? *clip : privacy::DpParams{}.sensitivity;
      dp.dim = static_cast<int>(w_prev.size());

      distortion::LearnerConfig learner = cfg.learner;
      learner.fallback_dir_seed =
          RngStream::derive(cfg.seed ^ 0x5afe5eedull, static_cast<std::uint64_t>(client.id) + 1,
                            static_cast<std::uint64_t>(round))
              .next_u64();

      const numkit::ModelSpec model = cfg.model;
      const Batch& batch = batches[k];
      distortion::GradFn grad_at = [&model, &local, &batch](const ParamVector& d) {
        ParamVector shifted = local;
        shifted += d;
        return numkit::backward(model, shifted, batch);
      };
      delta = distortion::make_distortion(cfg.mechanism, grad_at, local, budget, cfg.constants,
                                          dp, learner, rng);

      const auto shell = privacy::shell_bounds(budget, cfg.constants, dp);
      stats.chi = budget.chi;
      stats.shell_lower = shell.lower;
      stats.shell_upper = shell.upper;
    }
    stats.distortion_norm = delta.norm();

    ParamVector upload = local;
    upload += delta;
    numkit::ensure_finite(upload, "client upload");
    locals.push_back(std::move(local));
    uploads.push_back(std::move(upload));
  }

  out.w_next = server_aggregate(uploads, weights);
  out.w_shadow = server_aggregate(locals, weights);

  {
    ParamVector agg_delta = out.w_next;
    agg_delta -= out.w_shadow;
    out.record.aggregate_distortion_norm = agg_delta.norm();
  }

  // Inner-product decomposition residual on the round's live gradients:
  // <a, sum_k w_k b_k> = 0.5||a||^2 + 0.5 sum w_k ||b_k||^2 - 0.5 sum w_k ||a - b_k||^2.
  {
    double total = 0.0;
    for (double w : weights) total += w;
    ParamVector agg_grad = ParamVector::zeros_like(w_prev);
    double rhs = 0.5 * numkit::dot(global_grad, global_grad);
    for (std::size_t k = 0; k < k_count; ++k) {
      const double wk = weights[k] / total;
      ParamVector scaled = batch_grads[k];
      scaled *= wk;
      agg_grad += scaled;
      rhs += 0.5 * wk * numkit::dot(batch_grads[k], batch_grads[k]);
      ParamVector diff = global_grad;
      diff -= batch_grads[k];
      rhs -= 0.5 * wk * numkit::dot(diff, diff);
    }
    out.record.agg_grad_norm = agg_grad.norm();
    out.record.identity_residual = std::abs(numkit::dot(global_grad, agg_grad) - rhs);
  }

  for (std::size_t k = 0; k < k_count; ++k) {
    const Batch split = full_split(clients[k]);
    const double loss_protected = numkit::forward_loss(cfg.model, out.w_next, split);
    const double loss_shadow = numkit::forward_loss(cfg.model, out.w_shadow, split);
    out.record.clients[k].utility_loss = loss_protected - loss_shadow;
    out.record.clients[k].train_loss = loss_protected;
  }

  if (cfg.protect && cfg.oracle_samples > 0) {
    // Reference optimum of each client's sampled-batch loss over its shell,
    // aggregated with the same weights as the uploads.
    double total = 0.0;
    for (double w : weights) total += w;
    ParamVector agg_opt = ParamVector::zeros_like(w_prev);
    for (std::size_t k = 0; k < k_count; ++k) {
      const privacy::PrivacyBudget& budget = clients[k].budget_at(round);
      privacy::DpParams dp;
      dp.eta = cfg.eta;
      dp.sensitivity = clip ? *clip : privacy::DpParams{}.sensitivity;
      dp.dim = static_cast<int>(w_prev.size());
      const auto shell = privacy::shell_bounds(budget, cfg.constants, dp);
      const numkit::ModelSpec model = cfg.model;
      const Batch& batch = batches[k];
      const ParamVector& local = locals[k];
      theory::LossFn loss = [&model, &batch](const ParamVector& v) {
        return numkit::forward_loss(model, v, batch);
      };
      const std::uint64_t oracle_seed =
          RngStream::derive(cfg.seed ^ 0x0bac1eull, static_cast<std::uint64_t>(clients[k].id) + 1,
                            static_cast<std::uint64_t>(round))
              .next_u64();
      auto best = theory::brute_force_optimal_distortion(loss, local, shell, cfg.oracle_samples,
                                                         cfg.oracle_refine_steps, oracle_seed);
      best.delta *= weights[k] / total;
      agg_opt += best.delta;
    }
    out.record.oracle_delta_norm_sq = numkit::dot(agg_opt, agg_opt);
  }

  if (round == cfg.capture_round) {
    for (std::size_t k = 0; k < k_count; ++k) {
      RoundCapture cap;
      cap.round = round;
      cap.client = clients[k].id;
      cap.w_prev = w_prev;
      cap.w_upload = uploads[k];
      cap.batch = batches[k];
      out.captures.push_back(std::move(cap));
    }
  }
  return out;
}

Trajectory run_training(const FedConfig& cfg, const std::vector<ClientState>& clients,
                        const Matrix& test_inputs, const std::vector<int>& test_labels) {
  if (cfg.rounds <= 0) throw ParamError("run_training: rounds must be positive");

  ParamVector w(std::vector<double>(cfg.model.param_count(), 0.0), cfg.model.shapes());
  {
    RngStream init_rng = RngStream::derive(cfg.seed, 0x1417ull, 0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = cfg.init_scale * init_rng.normal();
  }
  const ParamVector w0 = w;

  Trajectory traj;
  traj.rounds.reserve(cfg.rounds);
  double utility_sum = 0.0;
  double distortion_sum = 0.0;
  long utility_count = 0;

  for (int t = 1; t <= cfg.rounds; ++t) {
    RoundResult result = run_round(clients, w, t, cfg);
    w = result.w_next;

    if (test_inputs.rows > 0) {
      const auto preds = numkit::predict_classes(cfg.model, w, test_inputs);
      result.record.test_accuracy = metrics::accuracy(preds, test_labels);
    }
    if (t == 1) traj.initial_global_loss = result.record.global_loss;

    double round_utility = 0.0;
    for (const auto& c : result.record.clients) {
      round_utility += c.utility_loss;
      utility_sum += c.utility_loss;
      distortion_sum += c.distortion_norm;
      ++utility_count;
    }
    traj.last_utility_loss = round_utility / static_cast<double>(result.record.clients.size());

    ParamVector drift = w;
    drift -= w0;
    traj.max_param_drift = std::max(traj.max_param_drift, drift.norm());

    for (auto& cap : result.captures) traj.captures.push_back(std::move(cap));
    traj.rounds.push_back(std::move(result.record));
  }

  traj.final_params = w;
  traj.mean_utility_loss = utility_sum / static_cast<double>(utility_count);
  traj.mean_distortion_norm = distortion_sum / static_cast<double>(utility_count);
  traj.final_test_accuracy = traj.rounds.back().test_accuracy;

  {
    double total = 0.0;
    for (const auto& c : clients) total += static_cast<double>(c.sample_count());
    double loss = 0.0;
    for (const auto& c : clients) {
      Batch split;
      split.inputs = c.inputs;
      split.labels = c.labels;
      loss += (static_cast<double>(c.sample_count()) / total) *
              numkit::forward_loss(cfg.model, w, split);
    }
    traj.final_global_loss = loss;
  }
  return traj;
}

}  // namespace ppfl::federation
