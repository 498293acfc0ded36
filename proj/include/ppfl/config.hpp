#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppfl/attack.hpp"
#include "ppfl/distortion.hpp"
#include "ppfl/numkit.hpp"
#include "ppfl/privacy.hpp"
#include "ppfl/theory.hpp"

namespace ppfl::config {

enum class DatasetKind { SyntheticBlobs, DigitsIdx };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::SyntheticBlobs;
  // synthetic-blobs
  int classes = 4;
  int dim = 8;
  int per_class = 8;
  int test_per_class = 25;
  double sigma = 0.3;
  double mean_scale = 1.25;
  // digits-idx
  std::string images;
  std::string labels;
  std::string test_images;
  std::string test_labels;
  bool downsample = true;
};

struct ModelChoice {
  numkit::ModelKind kind = numkit::ModelKind::SoftmaxRegression;
  int hidden = 16;
  numkit::Activation activation = numkit::Activation::Tanh;
};

// Attack settings plus the round whose captured upload the attack replays.
struct AttackSpec {
  attack::AttackConfig cfg;
  int round = 1;
};

// Recovery-frequency simulation behind the constant estimators.
struct EstimateSpec {
  int models = 4;
  int local_steps = 200;
  int attempts = 3;
  double threshold = 0.6;
  attack::SimilarityKind similarity = attack::SimilarityKind::Ssim;
  int prior_classes = 100;  // uniform prior 1/N
};

struct SweepSpec {
  std::vector<distortion::MechanismKind> mechanisms;
  int seeds = 5;
};

// A parsed experiment file with every default filled in.  `protect` is false
// only for mechanism "none".
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int clients = 4;
  int rounds = 1;
  int batch_size = 4;
  double eta = 0.1;
  std::optional<double> clip_norm;  // defaults to 500 for the DP mechanisms
  double init_scale = 0.1;
  std::string output_dir = "out";
  ModelChoice model;
  DatasetSpec dataset;
  bool protect = true;
  distortion::MechanismKind mechanism = distortion::MechanismKind::PlLearn;
  std::vector<double> budgets;
  privacy::PrivacyConstants constants;
  distortion::LearnerConfig learner;
  AttackSpec attack;
  SweepSpec sweep;
  EstimateSpec estimate;
  theory::NearOptimalityConfig theory;
  int capture_round = -1;
  int oracle_samples = 0;
  int oracle_refine_steps = 40;
};

// Parses and validates a JSON experiment file.  Unknown keys are rejected
// with their full path; missing values fall back to the defaults above.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// The effective configuration, defaults included, one key per line.
std::string echo_config(const ExperimentConfig& cfg);

std::string mechanism_name(distortion::MechanismKind kind, bool protect);
numkit::ModelSpec materialize_model(const ModelChoice& choice, int input_dim, int num_classes);

}  // namespace ppfl::config
