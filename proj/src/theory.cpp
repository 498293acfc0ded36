#include "ppfl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ppfl/distortion.hpp"

namespace ppfl::theory {

using numkit::ParamVector;

namespace {

ParamVector random_unit(std::size_t dim, RngStream& rng) {
  ParamVector v = ParamVector::zeros(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (std::size_t i = 0; i < dim; ++i) v[i] = rng.normal();
    n = v.norm();
  }
  v *= 1.0 / n;
  return v;
}

ParamVector point_in_ball(const ParamVector& center, double radius, RngStream& rng) {
  ParamVector dir = random_unit(center.size(), rng);
  const double r = radius * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(center.size()));
  dir *= r;
  dir += center;
  return dir;
}

}  // namespace

SmoothnessProbe probe_smoothness_fn(const GradFn& grad, std::size_t dim,
                                    const ParamVector& center, double radius, int samples,
                                    std::uint64_t seed) {
  if (samples <= 0) throw ParamError("probe_smoothness: samples must be positive");
  if (!(radius > 0.0)) throw ParamError("probe_smoothness: radius must be positive");
  RngStream rng(seed);
  SmoothnessProbe probe;
  probe.samples = samples;
  probe.curvature_floor = std::numeric_limits<double>::infinity();
  const double h = 1e-4 * radius;
  for (int s = 0; s < samples; ++s) {
    const ParamVector x = point_in_ball(center, radius, rng);
    const ParamVector y = point_in_ball(center, radius, rng);
    const ParamVector gx = grad(x);
    numkit::ensure_finite(gx, "probe gradient");
    probe.max_grad_norm = std::max(probe.max_grad_norm, gx.norm());

    ParamVector diff_x = x;
    diff_x -= y;
    const double dist = diff_x.norm();
    if (dist > 1e-12) {
      ParamVector diff_g = gx;
      diff_g -= grad(y);
      probe.lipschitz = std::max(probe.lipschitz, diff_g.norm() / dist);
    }

    ParamVector dir = random_unit(dim, rng);
    ParamVector xh = dir;
    xh *= h;
    xh += x;
    ParamVector diff = grad(xh);
    diff -= gx;
    probe.curvature_floor = std::min(probe.curvature_floor, numkit::dot(diff, dir) / h);
  }
  probe.curvature_floor = std::max(probe.curvature_floor, 0.0);
  return probe;
}

SmoothnessProbe probe_smoothness(const numkit::ModelSpec& spec, const numkit::Matrix& inputs,
                                 const numkit::Matrix& labels, const ParamVector& center,
                                 double radius, int samples, std::uint64_t seed) {
  numkit::Batch split;
  split.inputs = inputs;
  split.labels = labels;
  GradFn grad = [&spec, split](const ParamVector& w) {
    return numkit::backward(spec, w, split);
  };
  return probe_smoothness_fn(grad, spec.param_count(), center, radius, samples, seed);
}

ShellSearchResult brute_force_optimal_distortion(const LossFn& loss, const ParamVector& w,
                                                 const privacy::ShellBounds& b, int samples,
                                                 int refine_steps, std::uint64_t seed) {
  if (samples <= 0) throw ParamError("brute_force_optimal_distortion: samples must be positive");
  if (b.lower < 0.0 || b.upper < b.lower) {
    throw ParamError("brute_force_optimal_distortion: need 0 <= l <= u");
  }
  ShellSearchResult best;
  if (!(b.upper > 0.0)) {
    best.delta = ParamVector::zeros_like(w);
    best.loss = loss(w);
    return best;
  }

  RngStream rng(seed);
  best.loss = std::numeric_limits<double>::infinity();
  ParamVector probe = w;
  for (int s = 0; s < samples; ++s) {
    ParamVector delta = random_unit(w.size(), rng);
    delta *= rng.uniform(b.lower, b.upper);
    probe = w;
    probe += delta;
    const double value = loss(probe);
    if (value < best.loss) {
      best.loss = value;
      best.delta = std::move(delta);
    }
  }

  // Projected descent refinement from the best sample; the gradient comes from
  // central differences so the search stays independent of any analytic path.
  const ParamVector fallback = random_unit(w.size(), rng);
  double step = 0.25 * (b.upper - b.lower) + 1e-3 * b.upper;
  for (int it = 0; it < refine_steps; ++it) {
    const ParamVector base = best.delta;
    auto shifted_loss = [&loss, &w](const ParamVector& d) {
      ParamVector v = w;
      v += d;
      return loss(v);
    };
    ParamVector g = numkit::finite_diff_grad(shifted_loss, base, 1e-6 * std::max(1.0, b.upper));
    const double gn = g.norm();
    if (gn == 0.0) break;
    g *= step / gn;
    ParamVector cand = base;
    cand -= g;
    cand = distortion::project_shell(cand, b, fallback);
    probe = w;
    probe += cand;
    const double value = loss(probe);
    if (value < best.loss) {
      best.loss = value;
      best.delta = std::move(cand);
      step *= 1.25;
    } else {
      step *= 0.5;
      if (step < 1e-12 * std::max(1.0, b.upper)) break;
    }
  }
  return best;
}

ParamVector quadratic_ball_minimizer(const std::vector<ParamVector>& q_cols,
                                     const std::vector<double>& eigenvalues, const ParamVector& c,
                                     double radius) {
  if (q_cols.size() != eigenvalues.size() || q_cols.empty()) {
    throw ShapeError("quadratic_ball_minimizer: eigenbasis and eigenvalue counts differ");
  }
  if (!(radius > 0.0)) throw ParamError("quadratic_ball_minimizer: radius must be positive");
  if (c.norm() <= radius) return c;

  const std::size_t dim = q_cols.size();
  std::vector<double> c_hat(dim);
  for (std::size_t i = 0; i < dim; ++i) c_hat[i] = numkit::dot(q_cols[i], c);

  // ||x(mu)||^2 with x_i = lambda_i c_i / (lambda_i + mu) decreases in mu.
  auto norm_sq_at = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double xi = eigenvalues[i] * c_hat[i] / (eigenvalues[i] + mu);
      s += xi * xi;
    }
    return s;
  };

  double lo = 0.0, hi = 1.0;
  while (norm_sq_at(hi) > radius * radius) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (norm_sq_at(mid) > radius * radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = 0.5 * (lo + hi);

  ParamVector x = ParamVector::zeros_like(c);
  for (std::size_t i = 0; i < dim; ++i) {
    const double coeff = eigenvalues[i] * c_hat[i] / (eigenvalues[i] + mu);
    ParamVector comp = q_cols[i];
    comp *= coeff;
    x += comp;
  }
  return x;
}

void TheoryReport::add(const std::string& check, int round, int client, double observed,
                       double bound) {
  CheckRow row;
  row.check = check;
  row.round = round;
  row.client = client;
  row.observed = observed;
  row.bound = bound;
  row.pass = observed <= bound;
  passed = passed && row.pass;
  rows.push_back(std::move(row));
}

double QuadraticProblem::loss(const ParamVector& x) const {
  ParamVector y = x;
  y -= c;
  double s = 0.0;
  for (std::size_t i = 0; i < q_cols.size(); ++i) {
    const double proj = numkit::dot(q_cols[i], y);
    s += 0.5 * eigenvalues[i] * proj * proj;
  }
  return s;
}

ParamVector QuadraticProblem::grad(const ParamVector& x) const {
  ParamVector y = x;
  y -= c;
  ParamVector g = ParamVector::zeros_like(x);
  for (std::size_t i = 0; i < q_cols.size(); ++i) {
    const double proj = eigenvalues[i] * numkit::dot(q_cols[i], y);
    ParamVector comp = q_cols[i];
    comp *= proj;
    g += comp;
  }
  return g;
}

QuadraticProblem QuadraticProblem::random(std::size_t dim, double eig_lo, double eig_hi,
                                          double center_norm, std::uint64_t seed) {
  if (dim == 0) throw ParamError("QuadraticProblem: dim must be positive");
  if (!(eig_lo > 0.0) || eig_hi < eig_lo) throw ParamError("QuadraticProblem: need 0 < lo <= hi");
  RngStream rng(seed);
  QuadraticProblem p;

  // Orthonormal basis by Gram-Schmidt on Gaussian draws.
  while (p.q_cols.size() < dim) {
    ParamVector v = ParamVector::zeros(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = rng.normal();
    for (const auto& q : p.q_cols) {
      ParamVector proj = q;
      proj *= numkit::dot(q, v);
      v -= proj;
    }
    const double n = v.norm();
    if (n < 1e-8) continue;
    v *= 1.0 / n;
    p.q_cols.push_back(std::move(v));
  }
  p.eigenvalues.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) p.eigenvalues[i] = rng.uniform(eig_lo, eig_hi);
  p.c = random_unit(dim, rng);
  p.c *= center_norm;
  return p;
}

void check_contraction(const QuadraticProblem& problem, double radius, int steps,
                       TheoryReport& report, int tag) {
  const double lips = *std::max_element(problem.eigenvalues.begin(), problem.eigenvalues.end());
  const double curv = *std::min_element(problem.eigenvalues.begin(), problem.eigenvalues.end());
  const ParamVector opt =
      quadratic_ball_minimizer(problem.q_cols, problem.eigenvalues, problem.c, radius);

  distortion::LearnerConfig cfg;
  cfg.iterations = steps;
  cfg.step_size = 1.0 / lips;
  cfg.norm_reward = 0.0;
  cfg.optimizer = distortion::Optimizer::PlainGd;
  cfg.fallback_dir_seed = static_cast<std::uint64_t>(tag) + 11;

  privacy::ShellBounds ball{0.0, radius};
  const ParamVector w0 = ParamVector::zeros(problem.c.size());
  distortion::GradFn grad_at = [&problem](const ParamVector& d) { return problem.grad(d); };
  std::vector<ParamVector> iterates;
  distortion::learn_distortion(grad_at, w0, ball, cfg, nullptr, &iterates);

  double prev_sq;
  {
    ParamVector d0 = w0;
    d0 -= opt;
    prev_sq = numkit::dot(d0, d0);
  }
  double worst_ratio = 0.0;
  for (const auto& it : iterates) {
    ParamVector d = it;
    d -= opt;
    const double cur_sq = numkit::dot(d, d);
    if (prev_sq > 1e-18) worst_ratio = std::max(worst_ratio, cur_sq / prev_sq);
    prev_sq = cur_sq;
  }
  report.add("contraction", -1, tag, worst_ratio, 1.0 - curv / lips + 1e-9);
}

int required_learner_steps(double lipschitz, double curvature, int rounds, double gamma_cap) {
  if (!(lipschitz > 0.0) || !(curvature > 0.0)) {
    throw ParamError("required_learner_steps: constants must be positive");
  }
  if (rounds <= 0) throw ParamError("required_learner_steps: rounds must be positive");
  const double arg = 2.0 * rounds * gamma_cap * gamma_cap;
  const double steps = (lipschitz / curvature) * std::log(arg);
  return std::max(1, static_cast<int>(std::ceil(steps)));
}

TheoryReport verify_near_optimality(const NearOptimalityConfig& cfg) {
  TheoryReport report;

  std::vector<QuadraticProblem> problems;
  problems.reserve(cfg.clients);
  for (int k = 0; k < cfg.clients; ++k) {
    // Centers sit far outside the shell so the constrained optimum is a
    // boundary point and the ball-mirror contraction argument applies.
    problems.push_back(QuadraticProblem::random(cfg.dim, cfg.eig_lo, cfg.eig_hi,
                                                40.0 + 5.0 * k, cfg.seed + 101 * k));
  }

  double lips = 0.0;
  double curv = std::numeric_limits<double>::infinity();
  std::vector<double> client_smoothness(cfg.clients);
  for (int k = 0; k < cfg.clients; ++k) {
    GradFn grad = [&problems, k](const ParamVector& x) { return problems[k].grad(x); };
    const SmoothnessProbe probe = probe_smoothness_fn(
        grad, cfg.dim, ParamVector::zeros(cfg.dim), 2.0 * cfg.shell_upper, 300, cfg.seed + k);
    client_smoothness[k] = probe.lipschitz;
    lips = std::max(lips, probe.lipschitz);
    curv = std::min(curv, probe.curvature_floor);
  }

  const int learner_steps =
      required_learner_steps(lips, curv, cfg.rounds, cfg.shell_upper);
  report.add("learner_steps", -1, -1, static_cast<double>(learner_steps), 1e9);

  const privacy::ShellBounds shell{cfg.shell_lower, cfg.shell_upper};
  const double per_round_bound_scale = 1.0 / (2.0 * cfg.rounds * cfg.rounds);

  for (int k = 0; k < cfg.clients; ++k) {
    QuadraticProblem mirror = problems[k];
    check_contraction(mirror, cfg.shell_upper, learner_steps, report, k);
  }

  ParamVector w = ParamVector::zeros(cfg.dim);
  const double weight = 1.0 / cfg.clients;
  for (int t = 1; t <= cfg.rounds; ++t) {
    std::vector<ParamVector> locals, uploads, optimal_uploads;
    for (int k = 0; k < cfg.clients; ++k) {
      ParamVector g = problems[k].grad(w);
      g *= cfg.eta;
      ParamVector local = w;
      local -= g;

      distortion::LearnerConfig learner;
      learner.iterations = learner_steps;
      learner.step_size = 1.0 / lips;
      learner.norm_reward = 0.0;
      learner.optimizer = distortion::Optimizer::PlainGd;
      learner.fallback_dir_seed = cfg.seed + 13 * t + k;
      distortion::GradFn grad_at = [&problems, k, &local](const ParamVector& d) {
        ParamVector v = local;
        v += d;
        return problems[k].grad(v);
      };
      ParamVector delta = distortion::learn_distortion(grad_at, local, shell, learner);

      LossFn loss = [&problems, k](const ParamVector& v) { return problems[k].loss(v); };
      const auto oracle = brute_force_optimal_distortion(
          loss, local, shell, cfg.oracle_samples, cfg.oracle_refine_steps,
          cfg.seed + 7919ull * t + k);

      ParamVector upload = local;
      upload += delta;
      ParamVector best_upload = local;
      best_upload += oracle.delta;
      locals.push_back(std::move(local));
      uploads.push_back(std::move(upload));
      optimal_uploads.push_back(std::move(best_upload));
    }

    ParamVector w_next = ParamVector::zeros(cfg.dim);
    ParamVector w_star = ParamVector::zeros(cfg.dim);
    for (int k = 0; k < cfg.clients; ++k) {
      ParamVector a = uploads[k];
      a *= weight;
      w_next += a;
      ParamVector b = optimal_uploads[k];
      b *= weight;
      w_star += b;
    }

    for (int k = 0; k < cfg.clients; ++k) {
      // Shadow terms cancel in the difference of the two utility losses.
      const double gap = problems[k].loss(w_next) - problems[k].loss(w_star);
      report.add("near_optimal_gap", t, k,
                 gap, client_smoothness[k] * per_round_bound_scale + cfg.slack);
    }
    w = w_next;
  }
  return report;
}

TheoryReport verify_convergence_bound(const federation::Trajectory& trajectory,
                                      const SmoothnessProbe& probe, double eta) {
  if (trajectory.rounds.empty()) throw ParamError("verify_convergence_bound: empty trajectory");
  for (const auto& r : trajectory.rounds) {
    if (r.oracle_delta_norm_sq < 0.0) {
      throw ParamError("verify_convergence_bound: trajectory lacks optimal-distortion records");
    }
  }
  const double rounds = static_cast<double>(trajectory.rounds.size());
  double grad_limit = 0.0;
  for (const auto& r : trajectory.rounds) {
    grad_limit = std::max(grad_limit, r.agg_grad_norm);
    grad_limit = std::max(grad_limit, std::sqrt(r.grad_norm_sq));
  }

  double lhs = 0.0;
  double distortion_term = 0.0;
  for (const auto& r : trajectory.rounds) {
    lhs += 0.5 * eta * r.grad_norm_sq;
    distortion_term += probe.lipschitz * r.oracle_delta_norm_sq;
  }
  lhs /= rounds;
  distortion_term /= rounds;

  const double rhs = (trajectory.initial_global_loss - trajectory.final_global_loss) / rounds +
                     eta * grad_limit * grad_limit +
                     eta * eta * probe.lipschitz * grad_limit * grad_limit + distortion_term +
                     2.0 * probe.lipschitz / (rounds * rounds);

  TheoryReport report;
  report.add("convergence_bound", -1, -1, lhs, rhs + 1e-12);
  return report;
}

}  // namespace ppfl::theory
