#include "ppfl/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ppfl::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!known.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& path, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    fail(path.empty() ? key : path + "." + key, "wrong type");
  }
}

distortion::MechanismKind parse_mechanism(const std::string& name, const std::string& path,
                                          bool* protect) {
  *protect = true;
  if (name == "pl-learn") return distortion::MechanismKind::PlLearn;
  if (name == "pl-identical") return distortion::MechanismKind::PlIdentical;
  if (name == "dp-learn") return distortion::MechanismKind::DpLearn;
  if (name == "dp-identical") return distortion::MechanismKind::DpIdentical;
  if (name == "none") {
    *protect = false;
    return distortion::MechanismKind::PlLearn;  // never consulted when protect is off
  }
  fail(path, "unknown mechanism '" + name +
                 "' (expected pl-learn, pl-identical, dp-learn, dp-identical or none)");
}

void parse_model(const json& j, ModelChoice* out) {
  reject_unknown(j, "model", {"kind", "hidden", "activation"});
  const std::string kind = get_or<std::string>(j, "model", "kind", "softmax");
  if (kind == "softmax") {
    out->kind = numkit::ModelKind::SoftmaxRegression;
  } else if (kind == "mlp") {
    out->kind = numkit::ModelKind::MlpOneHidden;
  } else {
    fail("model.kind", "expected 'softmax' or 'mlp'");
  }
  out->hidden = get_or<int>(j, "model", "hidden", out->hidden);
  const std::string act = get_or<std::string>(j, "model", "activation", "tanh");
  if (act == "tanh") {
    out->activation = numkit::Activation::Tanh;
  } else if (act == "relu") {
    out->activation = numkit::Activation::Relu;
  } else {
    fail("model.activation", "expected 'tanh' or 'relu'");
  }
}

void parse_dataset(const json& j, DatasetSpec* out) {
  reject_unknown(j, "dataset",
                 {"kind", "classes", "dim", "per_class", "test_per_class", "sigma", "mean_scale",
                  "images", "labels", "test_images", "test_labels", "downsample"});
  const std::string kind = get_or<std::string>(j, "dataset", "kind", "synthetic-blobs");
  if (kind == "synthetic-blobs") {
    out->kind = DatasetKind::SyntheticBlobs;
  } else if (kind == "digits-idx") {
    out->kind = DatasetKind::DigitsIdx;
  } else {
    fail("dataset.kind", "expected 'synthetic-blobs' or 'digits-idx'");
  }
  out->classes = get_or<int>(j, "dataset", "classes", out->classes);
  out->dim = get_or<int>(j, "dataset", "dim", out->dim);
  out->per_class = get_or<int>(j, "dataset", "per_class", out->per_class);
  out->test_per_class = get_or<int>(j, "dataset", "test_per_class", out->test_per_class);
  out->sigma = get_or<double>(j, "dataset", "sigma", out->sigma);
  out->mean_scale = get_or<double>(j, "dataset", "mean_scale", out->mean_scale);
  out->images = get_or<std::string>(j, "dataset", "images", out->images);
  out->labels = get_or<std::string>(j, "dataset", "labels", out->labels);
  out->test_images = get_or<std::string>(j, "dataset", "test_images", out->test_images);
  out->test_labels = get_or<std::string>(j, "dataset", "test_labels", out->test_labels);
  out->downsample = get_or<bool>(j, "dataset", "downsample", out->downsample);

  if (out->kind == DatasetKind::DigitsIdx) {
    const std::pair<const char*, const std::string*> required[] = {
        {"images", &out->images},
        {"labels", &out->labels},
        {"test_images", &out->test_images},
        {"test_labels", &out->test_labels}};
    for (const auto& [key, value] : required) {
      if (value->empty()) fail(std::string("dataset.") + key, "required for digits-idx");
      if (!std::filesystem::exists(*value)) {
        fail(std::string("dataset.") + key, "file not found: " + *value);
      }
    }
  }
}

void parse_constants(const json& j, privacy::PrivacyConstants* out) {
  reject_unknown(j, "constants",
                 {"c_a", "c_b", "c_0", "c_2", "p", "data_diameter", "attack_rounds"});
  out->c_a = get_or<double>(j, "constants", "c_a", out->c_a);
  out->c_b = get_or<double>(j, "constants", "c_b", out->c_b);
  out->c_0 = get_or<double>(j, "constants", "c_0", out->c_0);
  out->c_2 = get_or<double>(j, "constants", "c_2", out->c_2);
  out->p = get_or<double>(j, "constants", "p", out->p);
  out->data_diameter = get_or<double>(j, "constants", "data_diameter", out->data_diameter);
  out->attack_rounds = get_or<int>(j, "constants", "attack_rounds", out->attack_rounds);
}

void parse_learner(const json& j, distortion::LearnerConfig* out) {
  reject_unknown(j, "learner", {"iterations", "step_size", "norm_reward", "optimizer"});
  out->iterations = get_or<int>(j, "learner", "iterations", out->iterations);
  out->step_size = get_or<double>(j, "learner", "step_size", out->step_size);
  out->norm_reward = get_or<double>(j, "learner", "norm_reward", out->norm_reward);
  const std::string opt = get_or<std::string>(j, "learner", "optimizer", "adam");
  if (opt == "adam") {
    out->optimizer = distortion::Optimizer::AdaptiveMoment;
  } else if (opt == "gd") {
    out->optimizer = distortion::Optimizer::PlainGd;
  } else {
    fail("learner.optimizer", "expected 'adam' or 'gd'");
  }
}

void parse_attack(const json& j, AttackSpec* out) {
  reject_unknown(j, "attack",
                 {"iterations", "lr", "tv_coefficient", "keep_every", "fd_step", "round"});
  out->cfg.iterations = get_or<int>(j, "attack", "iterations", out->cfg.iterations);
  out->cfg.lr = get_or<double>(j, "attack", "lr", out->cfg.lr);
  out->cfg.tv_coefficient = get_or<double>(j, "attack", "tv_coefficient", out->cfg.tv_coefficient);
  out->cfg.keep_every = get_or<int>(j, "attack", "keep_every", out->cfg.keep_every);
  out->cfg.fd_step = get_or<double>(j, "attack", "fd_step", out->cfg.fd_step);
  out->round = get_or<int>(j, "attack", "round", out->round);
}

void parse_estimate(const json& j, EstimateSpec* out) {
  reject_unknown(j, "estimate",
                 {"models", "local_steps", "attempts", "threshold", "similarity", "prior_classes"});
  out->models = get_or<int>(j, "estimate", "models", out->models);
  out->local_steps = get_or<int>(j, "estimate", "local_steps", out->local_steps);
  out->attempts = get_or<int>(j, "estimate", "attempts", out->attempts);
  out->threshold = get_or<double>(j, "estimate", "threshold", out->threshold);
  out->prior_classes = get_or<int>(j, "estimate", "prior_classes", out->prior_classes);
  const std::string sim = get_or<std::string>(j, "estimate", "similarity", "ssim");
  if (sim == "ssim") {
    out->similarity = attack::SimilarityKind::Ssim;
  } else if (sim == "neg-mse") {
    out->similarity = attack::SimilarityKind::NegMse;
  } else {
    fail("estimate.similarity", "expected 'ssim' or 'neg-mse'");
  }
}

void parse_sweep(const json& j, SweepSpec* out) {
  reject_unknown(j, "sweep", {"mechanisms", "seeds"});
  out->seeds = get_or<int>(j, "sweep", "seeds", out->seeds);
  if (j.contains("mechanisms")) {
    if (!j.at("mechanisms").is_array()) fail("sweep.mechanisms", "expected a list");
    out->mechanisms.clear();
    for (const auto& entry : j.at("mechanisms")) {
      bool protect = true;
      const auto kind = parse_mechanism(entry.get<std::string>(), "sweep.mechanisms", &protect);
      if (!protect) fail("sweep.mechanisms", "'none' cannot be swept against a budget");
      out->mechanisms.push_back(kind);
    }
  }
}

void parse_theory(const json& j, theory::NearOptimalityConfig* out) {
  reject_unknown(j, "theory",
                 {"clients", "rounds", "dim", "eig_lo", "eig_hi", "shell_lower", "shell_upper",
                  "eta", "oracle_samples", "oracle_refine_steps", "slack", "seed"});
  out->clients = get_or<int>(j, "theory", "clients", out->clients);
  out->rounds = get_or<int>(j, "theory", "rounds", out->rounds);
  out->dim = static_cast<std::size_t>(
      get_or<int>(j, "theory", "dim", static_cast<int>(out->dim)));
  out->eig_lo = get_or<double>(j, "theory", "eig_lo", out->eig_lo);
  out->eig_hi = get_or<double>(j, "theory", "eig_hi", out->eig_hi);
  out->shell_lower = get_or<double>(j, "theory", "shell_lower", out->shell_lower);
  out->shell_upper = get_or<double>(j, "theory", "shell_upper", out->shell_upper);
  out->eta = get_or<double>(j, "theory", "eta", out->eta);
  out->oracle_samples = get_or<int>(j, "theory", "oracle_samples", out->oracle_samples);
  out->oracle_refine_steps =
      get_or<int>(j, "theory", "oracle_refine_steps", out->oracle_refine_steps);
  out->slack = get_or<double>(j, "theory", "slack", out->slack);
  out->seed = static_cast<std::uint64_t>(
      get_or<std::int64_t>(j, "theory", "seed", static_cast<std::int64_t>(out->seed)));
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

  reject_unknown(j, "",
                 {"seed", "clients", "rounds", "batch_size", "eta", "clip_norm", "init_scale",
                  "output_dir", "model", "dataset", "mechanism", "budget", "budgets", "constants",
                  "learner", "attack", "sweep", "estimate", "theory", "capture_round",
                  "oracle_samples", "oracle_refine_steps"});

  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(
      get_or<std::int64_t>(j, "", "seed", static_cast<std::int64_t>(cfg.seed)));
  cfg.clients = get_or<int>(j, "", "clients", cfg.clients);
  if (!j.contains("rounds")) fail("rounds", "required");
  cfg.rounds = get_or<int>(j, "", "rounds", cfg.rounds);
  cfg.batch_size = get_or<int>(j, "", "batch_size", cfg.batch_size);
  cfg.eta = get_or<double>(j, "", "eta", cfg.eta);
  cfg.init_scale = get_or<double>(j, "", "init_scale", cfg.init_scale);
  cfg.output_dir = get_or<std::string>(j, "", "output_dir", cfg.output_dir);
  cfg.capture_round = get_or<int>(j, "", "capture_round", cfg.capture_round);
  cfg.oracle_samples = get_or<int>(j, "", "oracle_samples", cfg.oracle_samples);
  cfg.oracle_refine_steps = get_or<int>(j, "", "oracle_refine_steps", cfg.oracle_refine_steps);

  if (cfg.rounds < 1) fail("rounds", "must be >= 1");
  if (cfg.clients < 1) fail("clients", "must be >= 1");
  if (cfg.batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(cfg.eta > 0.0)) fail("eta", "must be > 0");

  if (j.contains("model")) parse_model(j.at("model"), &cfg.model);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), &cfg.dataset);
  if (j.contains("constants")) parse_constants(j.at("constants"), &cfg.constants);
  cfg.constants.validate();
  if (j.contains("learner")) parse_learner(j.at("learner"), &cfg.learner);
  if (j.contains("attack")) parse_attack(j.at("attack"), &cfg.attack);
  if (j.contains("estimate")) parse_estimate(j.at("estimate"), &cfg.estimate);
  if (j.contains("sweep")) parse_sweep(j.at("sweep"), &cfg.sweep);
  if (j.contains("theory")) parse_theory(j.at("theory"), &cfg.theory);

  const std::string mech = get_or<std::string>(j, "", "mechanism", "pl-learn");
  cfg.mechanism = parse_mechanism(mech, "mechanism", &cfg.protect);

  if (j.contains("budget") && j.contains("budgets")) {
    fail("budget", "give either 'budget' or 'budgets', not both");
  }
  if (j.contains("budget")) cfg.budgets = {get_or<double>(j, "", "budget", 0.0)};
  if (j.contains("budgets")) {
    if (!j.at("budgets").is_array()) fail("budgets", "expected a list of numbers");
    for (const auto& b : j.at("budgets")) cfg.budgets.push_back(b.get<double>());
  }

  if (j.contains("clip_norm")) {
    cfg.clip_norm = get_or<double>(j, "", "clip_norm", 0.0);
    if (!(*cfg.clip_norm > 0.0)) fail("clip_norm", "must be > 0");
  } else if (cfg.protect && (cfg.mechanism == distortion::MechanismKind::DpLearn ||
                             cfg.mechanism == distortion::MechanismKind::DpIdentical)) {
    cfg.clip_norm = privacy::DpParams{}.sensitivity;
  }

  // Sweeps default to comparing the configured mechanism's learner against
  // its budget-matched baseline.
  if (cfg.sweep.mechanisms.empty()) {
    if (cfg.mechanism == distortion::MechanismKind::DpLearn ||
        cfg.mechanism == distortion::MechanismKind::DpIdentical) {
      cfg.sweep.mechanisms = {distortion::MechanismKind::DpLearn,
                              distortion::MechanismKind::DpIdentical};
    } else {
      cfg.sweep.mechanisms = {distortion::MechanismKind::PlLearn,
                              distortion::MechanismKind::PlIdentical};
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string mechanism_name(distortion::MechanismKind kind, bool protect) {
  if (!protect) return "none";
  switch (kind) {
    case distortion::MechanismKind::PlLearn: return "pl-learn";
    case distortion::MechanismKind::PlIdentical: return "pl-identical";
    case distortion::MechanismKind::DpLearn: return "dp-learn";
    case distortion::MechanismKind::DpIdentical: return "dp-identical";
  }
  return "unknown";
}

numkit::ModelSpec materialize_model(const ModelChoice& choice, int input_dim, int num_classes) {
  numkit::ModelSpec spec;
  spec.kind = choice.kind;
  spec.input_dim = input_dim;
  spec.num_classes = num_classes;
  spec.hidden_dim = choice.hidden;
  spec.activation = choice.activation;
  return spec;
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "seed = " << cfg.seed << "\n";
  out << "clients = " << cfg.clients << "\n";
  out << "rounds = " << cfg.rounds << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "eta = " << cfg.eta << "\n";
  out << "clip_norm = ";
  if (cfg.clip_norm) {
    out << *cfg.clip_norm << "\n";
  } else {
    out << "unset\n";
  }
  out << "init_scale = " << cfg.init_scale << "\n";
  out << "output_dir = " << cfg.output_dir << "\n";
  out << "model.kind = "
      << (cfg.model.kind == numkit::ModelKind::SoftmaxRegression ? "softmax" : "mlp") << "\n";
  if (cfg.model.kind == numkit::ModelKind::MlpOneHidden) {
    out << "model.hidden = " << cfg.model.hidden << "\n";
    out << "model.activation = "
        << (cfg.model.activation == numkit::Activation::Tanh ? "tanh" : "relu") << "\n";
  }
  out << "dataset.kind = "
      << (cfg.dataset.kind == DatasetKind::SyntheticBlobs ? "synthetic-blobs" : "digits-idx")
      << "\n";
  if (cfg.dataset.kind == DatasetKind::SyntheticBlobs) {
    out << "dataset.classes = " << cfg.dataset.classes << "\n";
    out << "dataset.dim = " << cfg.dataset.dim << "\n";
    out << "dataset.per_class = " << cfg.dataset.per_class << "\n";
    out << "dataset.test_per_class = " << cfg.dataset.test_per_class << "\n";
    out << "dataset.sigma = " << cfg.dataset.sigma << "\n";
  } else {
    out << "dataset.images = " << cfg.dataset.images << "\n";
    out << "dataset.labels = " << cfg.dataset.labels << "\n";
    out << "dataset.downsample = " << (cfg.dataset.downsample ? "true" : "false") << "\n";
  }
  out << "mechanism = " << mechanism_name(cfg.mechanism, cfg.protect) << "\n";
  out << "budgets =";
  for (double b : cfg.budgets) out << " " << b;
  out << "\n";
  out << "constants.c_a = " << cfg.constants.c_a << "\n";
  out << "constants.c_b = " << cfg.constants.c_b << "\n";
  out << "constants.c_0 = " << cfg.constants.c_0 << "\n";
  out << "constants.c_2 = " << cfg.constants.c_2 << "\n";
  out << "constants.p = " << cfg.constants.p << "\n";
  out << "constants.data_diameter = " << cfg.constants.data_diameter << "\n";
  out << "constants.attack_rounds = " << cfg.constants.attack_rounds << "\n";
  out << "learner.iterations = " << cfg.learner.iterations << "\n";
  out << "learner.step_size = " << cfg.learner.step_size << "\n";
  out << "learner.norm_reward = " << cfg.learner.norm_reward << "\n";
  out << "learner.optimizer = "
      << (cfg.learner.optimizer == distortion::Optimizer::AdaptiveMoment ? "adam" : "gd") << "\n";
  out << "attack.iterations = " << cfg.attack.cfg.iterations << "\n";
  out << "attack.lr = " << cfg.attack.cfg.lr << "\n";
  out << "attack.tv_coefficient = " << cfg.attack.cfg.tv_coefficient << "\n";
  out << "attack.round = " << cfg.attack.round << "\n";
  out << "sweep.mechanisms =";
  for (auto m : cfg.sweep.mechanisms) out << " " << mechanism_name(m, true);
  out << "\n";
  out << "sweep.seeds = " << cfg.sweep.seeds << "\n";
  out << "capture_round = " << cfg.capture_round << "\n";
  out << "oracle_samples = " << cfg.oracle_samples << "\n";
  return out.str();
}

}  // namespace ppfl::config
