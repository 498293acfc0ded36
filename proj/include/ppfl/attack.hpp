#pragma once

#include <cstdint>
#include <vector>

#include "ppfl/numkit.hpp"

namespace ppfl::attack {

struct AttackConfig {
  int iterations = 1600;        // I
  double lr = 1.0;
  double lr_decay = 0.1;        // applied at 3/8, 5/8 and 7/8 of the run; 1 disables
  double tv_coefficient = 1e-5;
  bool known_label = true;      // label-free inversion is out of scope
  std::uint64_t init_seed = 0;
  int keep_every = 100;         // estimate snapshot stride
  double fd_step = 1e-4;        // input-gradient step for the hidden-layer model
};

// Reconstruction trace.  distances holds ||x_hat - x_true|| per iterate (mean
// over the batch when attacking several data) and is only filled when the
// true data are supplied.  final_estimate is the iterate with the lowest
// attack objective, which is the attacker-observable choice.
struct AttackResult {
  std::vector<std::vector<double>> estimates;  // every keep_every-th iterate
  std::vector<double> distances;
  std::vector<double> objective;
  std::vector<double> final_estimate;          // concatenated batch rows
  double final_objective = 0.0;
  int iterations_run = 0;
};

// Gradient the server-side observer reconstructs from a parameter upload:
// (W_prev - W_client) / eta.
numkit::ParamVector observed_gradient_from_update(const numkit::ParamVector& w_prev,
                                                  const numkit::ParamVector& w_client,
                                                  double eta);

// Iterative gradient inversion for a single datum with a known one-hot label:
// Adam on || grad(W, x_hat, y) - g_obs ||^2 + tv_coefficient * TV(x_hat).
// Softmax regression uses the analytic objective gradient; the hidden-layer
// model falls back to central differences on the input.
AttackResult invert_gradient(const numkit::ParamVector& g_obs, const numkit::ParamVector& w,
                             const std::vector<double>& label_onehot,
                             const numkit::ModelSpec& spec, const AttackConfig& cfg,
                             const std::vector<double>* x_true = nullptr,
                             const std::vector<double>* x_init = nullptr);

// Joint inversion of a batch whose labels are known; the objective matches
// the mean batch gradient.
AttackResult invert_gradient_batch(const numkit::ParamVector& g_obs, const numkit::ParamVector& w,
                                   const numkit::Matrix& labels_onehot,
                                   const numkit::ModelSpec& spec, const AttackConfig& cfg,
                                   const numkit::Matrix* x_true = nullptr,
                                   const numkit::Matrix* x_init = nullptr);

enum class RecoveryStatus { Recovered, NotRecoverable, InconsistentScale };

struct ClosedFormRecovery {
  RecoveryStatus status = RecoveryStatus::NotRecoverable;
  std::vector<double> x;
  double residual = 0.0;  // relative Frobenius mismatch of the implied gradient
};

// Non-iterative oracle for softmax regression on one datum: the observed
// gradient is (p - y) x', a rank-1 matrix, so x is its dominant row direction
// and the scale follows from a 1-D search that makes softmax(W x_hat)
// consistent with the implied residual.
ClosedFormRecovery closed_form_recover_linear(const numkit::ParamVector& g_obs,
                                              const numkit::ParamVector& w,
                                              const std::vector<double>& label_onehot,
                                              const numkit::ModelSpec& spec);

// (D - mean clamped iterate distance) / D; an attacker that never got close
// scores 0, exact recovery at every iterate scores 1.  No iterates means no
// attack, which leaks nothing.
double empirical_leakage(const std::vector<double>& distances, double data_diameter);

struct PreparedModel {
  numkit::ParamVector params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Independently initialized models, each trained for `steps` minibatch SGD
// steps; the population the recovery-frequency estimator averages over.
std::vector<PreparedModel> prepare_models(const numkit::ModelSpec& spec,
                                          const numkit::Matrix& inputs,
                                          const numkit::Matrix& labels, int count, int steps,
                                          double eta, int batch_size, std::uint64_t seed);

enum class SimilarityKind { Ssim, NegMse };

// Per-model recovery frequency f_hat = M_d / (S * attempts): the fraction of
// attack attempts whose reconstruction of datum d clears the similarity
// threshold against the true datum.
std::vector<std::vector<double>> recovery_frequency(const std::vector<PreparedModel>& models,
                                                    const numkit::ModelSpec& spec,
                                                    const numkit::Batch& client_batch, double eta,
                                                    int attempts, double threshold,
                                                    SimilarityKind similarity,
                                                    const AttackConfig& cfg);

struct BayesianConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

// Constants from recovery-frequency estimates: c1 is the mean symmetrized
// log-ratio divergence between posterior kappa1 and prior kappa2; c2 is
// 0.5 * (exp(2 * max log(kappa3 / kappa2)) - 1), floored at zero.
BayesianConstants bayesian_constants(const std::vector<double>& kappa1, double kappa2,
                                     const std::vector<double>& kappa3);

}  // namespace ppfl::attack
