#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ppfl/distortion.hpp"
#include "ppfl/numkit.hpp"
#include "ppfl/privacy.hpp"

namespace ppfl::federation {

// A participant holding its private training split.  The budget schedule has
// either one entry (reused every round) or one entry per round.
struct ClientState {
  int id = 0;
  numkit::Matrix inputs;
  numkit::Matrix labels;  // one-hot
  std::vector<privacy::PrivacyBudget> budget_schedule;

  long sample_count() const { return inputs.rows; }
  const privacy::PrivacyBudget& budget_at(int round) const;
};

struct ClientRoundStats {
  double chi = 0.0;
  double shell_lower = 0.0;
  double shell_upper = 0.0;
  double distortion_norm = 0.0;
  double utility_loss = 0.0;
  double train_loss = 0.0;
};

struct RoundRecord {
  int round = 0;  // 1-based
  std::vector<ClientRoundStats> clients;
  double test_accuracy = 0.0;
  double global_loss = 0.0;         // weighted full-split loss at the round's start
  double grad_norm_sq = 0.0;        // squared norm of the global gradient at the start
  double agg_grad_norm = 0.0;       // norm of the weighted batch-gradient aggregate
  double aggregate_distortion_norm = 0.0;
  double identity_residual = 0.0;   // inner-product decomposition check on live gradients
  double oracle_delta_norm_sq = -1.0;  // aggregated optimal-distortion norm^2, -1 when not probed
};

// Per-client upload captured for offline attack replay.
struct RoundCapture {
  int round = 0;
  int client = 0;
  numkit::ParamVector w_prev;
  numkit::ParamVector w_upload;
  numkit::Batch batch;
};

struct Trajectory {
  std::vector<RoundRecord> rounds;
  numkit::ParamVector final_params;
  double initial_global_loss = 0.0;
  double final_global_loss = 0.0;  // after the last aggregation
  double mean_utility_loss = 0.0;
  double last_utility_loss = 0.0;
  double final_test_accuracy = 0.0;
  double mean_distortion_norm = 0.0;
  double max_param_drift = 0.0;  // max ||W_t - W_0|| over the run
  std::vector<RoundCapture> captures;
};

struct FedConfig {
  numkit::ModelSpec model;
  int rounds = 1;
  int batch_size = 4;
  double eta = 0.1;
  std::optional<double> clip_norm;  // applied to client gradients when set
  bool protect = true;
  distortion::MechanismKind mechanism = distortion::MechanismKind::PlLearn;
  privacy::PrivacyConstants constants;
  distortion::LearnerConfig learner;
  std::uint64_t seed = 1;
  double init_scale = 0.1;   // std-dev of the random parameter init
  int capture_round = -1;    // 1-based round whose uploads are captured, -1 disables
  int oracle_samples = 0;    // >0 enables the per-round optimal-distortion search
  int oracle_refine_steps = 40;
};

// One local update: W - eta * g, where g is the batch gradient optionally
// clipped to clip_norm.
numkit::ParamVector local_step(const numkit::ParamVector& w, const numkit::ParamVector& grad,
                               double eta, std::optional<double> clip_norm);

// Composes backward() with local_step for one client batch.
numkit::ParamVector client_local_step(const numkit::ModelSpec& spec,
                                      const numkit::ParamVector& w, const numkit::Batch& batch,
                                      double eta, std::optional<double> clip_norm);

// Sample-count weighted average of client parameters.
numkit::ParamVector server_aggregate(const std::vector<numkit::ParamVector>& params,
                                     const std::vector<double>& weights);

struct RoundResult {
  numkit::ParamVector w_next;
  numkit::ParamVector w_shadow;  // same aggregation without the distortions
  RoundRecord record;
  std::vector<RoundCapture> captures;
};

// One protected round from w_prev: per-client batch sampling, local step,
// distortion, then the weighted aggregation.  Client randomness comes from
// streams derived from (seed, client id, round), so results do not depend on
// evaluation order.  Per-client utility loss is the client's full-split loss
// at the distorted aggregate minus the loss at the shadow aggregate.
RoundResult run_round(const std::vector<ClientState>& clients, const numkit::ParamVector& w_prev,
                      int round, const FedConfig& cfg);

// T rounds from a seeded random init, recording per-round statistics and the
// test accuracy on the held-out set.
Trajectory run_training(const FedConfig& cfg, const std::vector<ClientState>& clients,
                        const numkit::Matrix& test_inputs, const std::vector<int>& test_labels);

}  // namespace ppfl::federation
