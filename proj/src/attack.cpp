#include "ppfl/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ppfl/metrics.hpp"
#include "ppfl/rng.hpp"

namespace ppfl::attack {

using numkit::Batch;
using numkit::Matrix;
using numkit::ModelSpec;
using numkit::ParamVector;

namespace {

double tv_penalty(const double* x, int m) {
  double s = 0.0;
  for (int j = 0; j + 1 < m; ++j) {
    const double d = x[j + 1] - x[j];
    s += d * d;
  }
  return s;
}

void tv_penalty_grad(const double* x, int m, double coef, double* out) {
  for (int j = 0; j + 1 < m; ++j) {
    const double d = 2.0 * coef * (x[j + 1] - x[j]);
    out[j + 1] += d;
    out[j] -= d;
  }
}

// Shared state for the batch match objective on the softmax-regression model.
// Candidates live in one flat vector, batch-row major.
struct SoftmaxMatch {
  const ModelSpec& spec;
  const ParamVector& w;
  const Matrix& labels;
  const ParamVector& g_obs;
  double tv_coef;
  int s, m, c;

  SoftmaxMatch(const ModelSpec& sp, const ParamVector& wp, const Matrix& lab,
               const ParamVector& g, double tv)
      : spec(sp), w(wp), labels(lab), g_obs(g), tv_coef(tv), s(lab.rows),
        m(sp.input_dim), c(sp.num_classes) {}

  void residuals(const std::vector<double>& x, std::vector<double>& probs) const {
    // probs holds softmax(W x_d) - y_d for every datum, row major.
    for (int d = 0; d < s; ++d) {
      double zmax = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < c; ++i) {
        double z = 0.0;
        for (int j = 0; j < m; ++j) z += w[static_cast<std::size_t>(i) * m + j] * x[static_cast<std::size_t>(d) * m + j];
        probs[static_cast<std::size_t>(d) * c + i] = z;
        zmax = std::max(zmax, z);
      }
      double sum = 0.0;
      for (int i = 0; i < c; ++i) {
        double& v = probs[static_cast<std::size_t>(d) * c + i];
        v = std::exp(v - zmax);
        sum += v;
      }
      for (int i = 0; i < c; ++i) {
        double& v = probs[static_cast<std::size_t>(d) * c + i];
        v = v / sum;
      }
    }
  }

  // Mismatch matrix E = (1/S) sum_d r_d x_d' - G_obs, from precomputed
  // residuals r_d = p_d - y_d.
  void mismatch(const std::vector<double>& x, const std::vector<double>& probs,
                std::vector<double>& e) const {
    std::fill(e.begin(), e.end(), 0.0);
    for (int d = 0; d < s; ++d) {
      for (int i = 0; i < c; ++i) {
        const double r = (probs[static_cast<std::size_t>(d) * c + i] - labels.at(d, i)) / s;
        for (int j = 0; j < m; ++j) {
          e[static_cast<std::size_t>(i) * m + j] += r * x[static_cast<std::size_t>(d) * m + j];
        }
      }
    }
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= g_obs[i];
  }

  double objective(const std::vector<double>& x, std::vector<double>& probs,
                   std::vector<double>& e) const {
    residuals(x, probs);
    mismatch(x, probs, e);
    double obj = 0.0;
    for (double v : e) obj += v * v;
    for (int d = 0; d < s; ++d) obj += tv_coef * tv_penalty(&x[static_cast<std::size_t>(d) * m], m);
    return obj;
  }

  void gradient(const std::vector<double>& x, const std::vector<double>& probs,
                const std::vector<double>& e, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> a(c), u(c);
    for (int d = 0; d < s; ++d) {
      const double* xd = &x[static_cast<std::size_t>(d) * m];
      const double* pd = &probs[static_cast<std::size_t>(d) * c];
      double* od = &out[static_cast<std::size_t>(d) * m];
      double pa = 0.0;
      for (int i = 0; i < c; ++i) {
        double s_ = 0.0;
        for (int j = 0; j < m; ++j) s_ += e[static_cast<std::size_t>(i) * m + j] * xd[j];
        a[i] = s_;
        pa += pd[i] * s_;
      }
      for (int i = 0; i < c; ++i) u[i] = pd[i] * (a[i] - pa);
      for (int j = 0; j < m; ++j) {
        double g = 0.0;
        for (int i = 0; i < c; ++i) {
          const double r = pd[i] - labels.at(d, i);
          g += e[static_cast<std::size_t>(i) * m + j] * r;
          g += w[static_cast<std::size_t>(i) * m + j] * u[i];
        }
        od[j] = 2.0 * g / s;
      }
      tv_penalty_grad(xd, m, tv_coef, od);
    }
  }
};

void check_attack_inputs(const ParamVector& g_obs, const ParamVector& w, const ModelSpec& spec,
                         const AttackConfig& cfg) {
  if (!cfg.known_label) {
    throw CapabilityError("invert_gradient: label-free inversion is not supported");
  }
  if (cfg.iterations < 0) throw ParamError("invert_gradient: iterations must be >= 0");
  if (!(cfg.lr > 0.0)) throw ParamError("invert_gradient: lr must be positive");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0) {
    throw ParamError("invert_gradient: lr_decay must be in (0, 1]");
  }
  if (w.size() != spec.param_count() || g_obs.size() != spec.param_count()) {
    throw ShapeError("invert_gradient: parameter and gradient sizes must match the model");
  }
  numkit::ensure_finite(g_obs, "observed gradient");
  numkit::ensure_finite(w, "attacked parameters");
}

AttackResult run_inversion(const ParamVector& g_obs, const ParamVector& w,
                           const Matrix& labels, const ModelSpec& spec, const AttackConfig& cfg,
                           const Matrix* x_true, const Matrix* x_init) {
  check_attack_inputs(g_obs, w, spec, cfg);
  const int s = labels.rows;
  const int m = spec.input_dim;
  const std::size_t dim = static_cast<std::size_t>(s) * m;

  const bool analytic = spec.kind == numkit::ModelKind::SoftmaxRegression;

  std::vector<double> x(dim);
  if (x_init) {
    for (int d = 0; d < s; ++d)
      for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(d) * m + j] = x_init->at(d, j);
  } else {
    RngStream rng(cfg.init_seed);
    for (auto& v : x) v = rng.normal();
  }

  SoftmaxMatch match(spec, w, labels, g_obs, cfg.tv_coefficient);
  std::vector<double> probs(static_cast<std::size_t>(s) * spec.num_classes);
  std::vector<double> e(spec.param_count());

  // The hidden-layer model has no closed-form input gradient here; fall back
  // to central differences of the full objective.
  auto mlp_objective = [&](const std::vector<double>& cand) {
    Batch probe;
    probe.inputs = Matrix(s, m);
    for (int d = 0; d < s; ++d)
      for (int j = 0; j < m; ++j)
        probe.inputs.at(d, j) = cand[static_cast<std::size_t>(d) * m + j];
    probe.labels = labels;
    ParamVector g = numkit::backward(spec, w, probe);
    g -= g_obs;
    double tv = 0.0;
    for (int d = 0; d < s; ++d) tv += tv_penalty(cand.data() + static_cast<std::size_t>(d) * m, m);
    return numkit::dot(g, g) + cfg.tv_coefficient * tv;
  };

  numkit::AdamState adam = numkit::AdamState::init(dim);
  AttackResult result;
  result.estimates.reserve(cfg.iterations / std::max(1, cfg.keep_every) + 1);
  result.objective.reserve(cfg.iterations);
  if (x_true) result.distances.reserve(cfg.iterations);

  // An attacker with no iterations keeps its prior draw.
  if (cfg.iterations == 0) {
    result.final_estimate = x;
    result.final_objective = analytic ? match.objective(x, probs, e) : mlp_objective(x);
    return result;
  }
  result.final_objective = std::numeric_limits<double>::infinity();

  // Step decay mirroring the usual inversion-attack schedule: the rate drops
  // by lr_decay at 3/8, 5/8 and 7/8 of the run, so lr=1 still polishes the
  // estimate to high precision by the final phase.
  const int milestones[3] = {3 * cfg.iterations / 8, 5 * cfg.iterations / 8,
                             7 * cfg.iterations / 8};
  double lr = cfg.lr;

  std::vector<double> grad(dim);
  for (int it = 1; it <= cfg.iterations; ++it) {
    for (int ms : milestones) {
      if (it - 1 == ms && ms > 0) lr *= cfg.lr_decay;
    }
    if (analytic) {
      match.residuals(x, probs);
      match.mismatch(x, probs, e);
      match.gradient(x, probs, e, grad);
    } else {
      std::vector<double> cand = x;
      for (std::size_t j = 0; j < dim; ++j) {
        const double xj = cand[j];
        cand[j] = xj + cfg.fd_step;
        const double fp = mlp_objective(cand);
        cand[j] = xj - cfg.fd_step;
        const double fm = mlp_objective(cand);
        cand[j] = xj;
        grad[j] = (fp - fm) / (2.0 * cfg.fd_step);
      }
    }

    auto update = numkit::adam_step(adam, ParamVector(grad), lr);
    adam = std::move(update.state);
    for (std::size_t j = 0; j < dim; ++j) x[j] += update.step[j];

    const double obj = analytic ? match.objective(x, probs, e) : mlp_objective(x);
    result.objective.push_back(obj);
    if (obj < result.final_objective) {
      result.final_objective = obj;
      result.final_estimate = x;
    }
    if (x_true) {
      double dist = 0.0;
      for (int d = 0; d < s; ++d) {
        double per = 0.0;
        for (int j = 0; j < m; ++j) {
          const double diff = x[static_cast<std::size_t>(d) * m + j] - x_true->at(d, j);
          per += diff * diff;
        }
        dist += std::sqrt(per);
      }
      result.distances.push_back(dist / s);
    }
    if (cfg.keep_every > 0 && it % cfg.keep_every == 0) result.estimates.push_back(x);
    result.iterations_run = it;
  }
  return result;
}

}  // namespace

ParamVector observed_gradient_from_update(const ParamVector& w_prev, const ParamVector& w_client,
                                          double eta) {
  if (!(eta > 0.0)) throw ParamError("observed_gradient_from_update: eta must be positive");
  ParamVector g = w_prev;
  g -= w_client;
  g *= 1.0 / eta;
  return g;
}

AttackResult invert_gradient(const ParamVector& g_obs, const ParamVector& w,
                             const std::vector<double>& label_onehot, const ModelSpec& spec,
                             const AttackConfig& cfg, const std::vector<double>* x_true,
                             const std::vector<double>* x_init) {
  if (static_cast<int>(label_onehot.size()) != spec.num_classes) {
    throw ShapeError("invert_gradient: label length does not match class count");
  }
  Matrix labels(1, spec.num_classes);
  for (int i = 0; i < spec.num_classes; ++i) labels.at(0, i) = label_onehot[i];

  Matrix truth, init;
  const Matrix* truth_p = nullptr;
  const Matrix* init_p = nullptr;
  if (x_true) {
    truth = Matrix(1, spec.input_dim);
    for (int j = 0; j < spec.input_dim; ++j) truth.at(0, j) = (*x_true)[j];
    truth_p = &truth;
  }
  if (x_init) {
    init = Matrix(1, spec.input_dim);
    for (int j = 0; j < spec.input_dim; ++j) init.at(0, j) = (*x_init)[j];
    init_p = &init;
  }
  return run_inversion(g_obs, w, labels, spec, cfg, truth_p, init_p);
}

AttackResult invert_gradient_batch(const ParamVector& g_obs, const ParamVector& w,
                                   const Matrix& labels_onehot, const ModelSpec& spec,
                                   const AttackConfig& cfg, const Matrix* x_true,
                                   const Matrix* x_init) {
  if (labels_onehot.cols != spec.num_classes || labels_onehot.rows <= 0) {
    throw ShapeError("invert_gradient_batch: label block must be batch x num_classes");
  }
  return run_inversion(g_obs, w, labels_onehot, spec, cfg, x_true, x_init);
}

ClosedFormRecovery closed_form_recover_linear(const ParamVector& g_obs, const ParamVector& w,
                                              const std::vector<double>& label_onehot,
                                              const ModelSpec& spec) {
  if (spec.kind != numkit::ModelKind::SoftmaxRegression) {
    throw CapabilityError("closed_form_recover_linear: softmax-regression only");
  }
  if (w.size() != spec.param_count() || g_obs.size() != spec.param_count()) {
    throw ShapeError("closed_form_recover_linear: sizes must match the model");
  }
  if (static_cast<int>(label_onehot.size()) != spec.num_classes) {
    throw ShapeError("closed_form_recover_linear: label length does not match class count");
  }
  const int c = spec.num_classes;
  const int m = spec.input_dim;
  ClosedFormRecovery out;

  double frob_sq = 0.0;
  for (std::size_t i = 0; i < g_obs.size(); ++i) frob_sq += g_obs[i] * g_obs[i];
  const double frob = std::sqrt(frob_sq);
  if (frob < 1e-12) return out;

  // Dominant right singular direction by power iteration on G'G, started from
  // the heaviest column.
  std::vector<double> v(m, 0.0);
  {
    int best_col = 0;
    double best_norm = -1.0;
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int i = 0; i < c; ++i) {
        const double g = g_obs[static_cast<std::size_t>(i) * m + j];
        s += g * g;
      }
      if (s > best_norm) {
        best_norm = s;
        best_col = j;
      }
    }
    v[best_col] = 1.0;
  }
  std::vector<double> gv(c), gtgv(m);
  for (int iter = 0; iter < 60; ++iter) {
    for (int i = 0; i < c; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += g_obs[static_cast<std::size_t>(i) * m + j] * v[j];
      gv[i] = s;
    }
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int i = 0; i < c; ++i) s += g_obs[static_cast<std::size_t>(i) * m + j] * gv[i];
      gtgv[j] = s;
    }
    double n = 0.0;
    for (double x : gtgv) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) return out;
    for (int j = 0; j < m; ++j) v[j] = gtgv[j] / n;
  }
  for (int i = 0; i < c; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += g_obs[static_cast<std::size_t>(i) * m + j] * v[j];
    gv[i] = s;
  }
  double sigma1_sq = 0.0;
  for (double x : gv) sigma1_sq += x * x;
  const double sigma1 = std::sqrt(sigma1_sq);

  // Energy outside the dominant rank-1 component, as a Frobenius residual.
  double tail_sq = 0.0;
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < m; ++j) {
      const double r = g_obs[static_cast<std::size_t>(i) * m + j] - gv[i] * v[j];
      tail_sq += r * r;
    }
  }
  const double sigma_tail = std::sqrt(tail_sq);
  if (sigma1 < 1e3 * sigma_tail) return out;

  // 1-D scale search: phi(scale) is the relative mismatch between the implied
  // gradient (softmax(W * scale * v) - y)(scale * v)' and the observation.
  auto mismatch_at = [&](double scale, int sign) {
    std::vector<double> x(m);
    for (int j = 0; j < m; ++j) x[j] = sign * scale * v[j];
    const auto probs = numkit::class_probabilities(spec, w, x);
    double s = 0.0;
    for (int i = 0; i < c; ++i) {
      const double r = probs[i] - label_onehot[i];
      for (int j = 0; j < m; ++j) {
        const double d = r * x[j] - g_obs[static_cast<std::size_t>(i) * m + j];
        s += d * d;
      }
    }
    return std::sqrt(s) / frob;
  };

  double best_phi = std::numeric_limits<double>::infinity();
  double best_scale = 0.0;
  int best_sign = 1;
  const double scale_floor = frob / std::sqrt(2.0) * 1e-2;
  for (int sign : {1, -1}) {
    for (int g = 0; g <= 400; ++g) {
      const double scale = scale_floor * std::pow(10.0, 8.0 * g / 400.0);
      const double phi = mismatch_at(scale, sign);
      if (phi < best_phi) {
        best_phi = phi;
        best_scale = scale;
        best_sign = sign;
      }
    }
  }
  {
    double lo = best_scale / 1.1, hi = best_scale * 1.1;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (mismatch_at(m1, best_sign) < mismatch_at(m2, best_sign)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    best_scale = 0.5 * (lo + hi);
    best_phi = mismatch_at(best_scale, best_sign);
  }

  out.residual = best_phi;
  if (best_phi > 1e-6) {
    out.status = RecoveryStatus::InconsistentScale;
    return out;
  }
  out.status = RecoveryStatus::Recovered;
  out.x.resize(m);
  for (int j = 0; j < m; ++j) out.x[j] = best_sign * best_scale * v[j];
  return out;
}

double empirical_leakage(const std::vector<double>& distances, double data_diameter) {
  if (!(data_diameter > 0.0)) throw ParamError("empirical_leakage: diameter must be positive");
  if (distances.empty()) return 0.0;
  double s = 0.0;
  for (double d : distances) s += std::clamp(d, 0.0, data_diameter);
  s /= static_cast<double>(distances.size());
  return (data_diameter - s) / data_diameter;
}

std::vector<PreparedModel> prepare_models(const ModelSpec& spec, const Matrix& inputs,
                                          const Matrix& labels, int count, int steps, double eta,
                                          int batch_size, std::uint64_t seed) {
  if (count <= 0 || steps < 0) throw ParamError("prepare_models: count/steps out of range");
  if (batch_size <= 0) throw ParamError("prepare_models: batch size must be positive");
  if (inputs.rows != labels.rows || inputs.rows == 0) {
    throw ShapeError("prepare_models: inputs and labels must align");
  }
  Batch full;
  full.inputs = inputs;
  full.labels = labels;

  std::vector<PreparedModel> out;
  out.reserve(count);
  for (int mdl = 0; mdl < count; ++mdl) {
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(mdl) + 1, 0x9d0de1ull);
    ParamVector params(std::vector<double>(spec.param_count(), 0.0), spec.shapes());
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = 0.1 * rng.normal();

    PreparedModel pm;
    pm.initial_loss = numkit::forward_loss(spec, params, full);
    const int take = std::min(batch_size, inputs.rows);
    for (int step = 0; step < steps; ++step) {
      Batch mini;
      mini.inputs = Matrix(take, inputs.cols);
      mini.labels = Matrix(take, labels.cols);
      for (int r = 0; r < take; ++r) {
        const int idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(inputs.rows)));
        for (int j = 0; j < inputs.cols; ++j) mini.inputs.at(r, j) = inputs.at(idx, j);
        for (int j = 0; j < labels.cols; ++j) mini.labels.at(r, j) = labels.at(idx, j);
      }
      ParamVector g = numkit::backward(spec, params, mini);
      g *= eta;
      params -= g;
    }
    pm.final_loss = numkit::forward_loss(spec, params, full);
    pm.params = std::move(params);
    out.push_back(std::move(pm));
  }
  return out;
}

std::vector<std::vector<double>> recovery_frequency(const std::vector<PreparedModel>& models,
                                                    const ModelSpec& spec,
                                                    const Batch& client_batch, double eta,
                                                    int attempts, double threshold,
                                                    SimilarityKind similarity,
                                                    const AttackConfig& cfg) {
  if (models.empty()) throw ParamError("recovery_frequency: no models");
  if (attempts <= 0) throw ParamError("recovery_frequency: attempts must be positive");
  if (client_batch.size() <= 0) throw ShapeError("recovery_frequency: empty batch");
  (void)eta;  // the attack consumes the gradient directly

  const int s = client_batch.size();
  const int m = spec.input_dim;
  std::vector<std::vector<double>> out(models.size(), std::vector<double>(s, 0.0));

  for (std::size_t mdl = 0; mdl < models.size(); ++mdl) {
    const ParamVector g_obs = numkit::backward(spec, models[mdl].params, client_batch);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      AttackConfig acfg = cfg;
      acfg.init_seed = RngStream::derive(cfg.init_seed, mdl + 1,
                                         static_cast<std::uint64_t>(attempt) + 1)
                           .next_u64();
      const AttackResult res = invert_gradient_batch(g_obs, models[mdl].params,
                                                     client_batch.labels, spec, acfg);
      for (int d = 0; d < s; ++d) {
        std::vector<double> est(m), truth(m);
        for (int j = 0; j < m; ++j) {
          est[j] = res.final_estimate[static_cast<std::size_t>(d) * m + j];
          truth[j] = client_batch.inputs.at(d, j);
        }
        const double sim = similarity == SimilarityKind::Ssim
                               ? metrics::ssim(est, truth, 1.0)
                               : -metrics::mse(est, truth);
        if (sim > threshold) out[mdl][d] += 1.0;
      }
    }
    for (int d = 0; d < s; ++d) out[mdl][d] /= static_cast<double>(s) * attempts;
  }
  return out;
}

BayesianConstants bayesian_constants(const std::vector<double>& kappa1, double kappa2,
                                     const std::vector<double>& kappa3) {
  if (kappa1.empty() || kappa3.empty()) throw ParamError("bayesian_constants: empty estimates");
  if (!(kappa2 > 0.0)) throw ParamError("bayesian_constants: prior must be positive");
  for (double k : kappa1) {
    if (!(k > 0.0)) throw ParamError("bayesian_constants: posterior estimates must be positive");
  }
  for (double k : kappa3) {
    if (!(k > 0.0)) throw ParamError("bayesian_constants: max posteriors must be positive");
  }
  BayesianConstants out;
  for (double k1 : kappa1) {
    const double mid = 0.5 * (k1 + kappa2);
    out.c1 += k1 * std::log(k1 / mid) + kappa2 * std::log(kappa2 / mid);
  }
  out.c1 /= static_cast<double>(kappa1.size());

  // The exponent is floored at zero: a posterior below the prior leaks nothing.
  double max_log = 0.0;
  for (double k3 : kappa3) max_log = std::max(max_log, std::log(k3 / kappa2));
  out.c2 = 0.5 * (std::exp(2.0 * max_log) - 1.0);
  return out;
}

}  // namespace ppfl::attack
