#include "ppfl/distortion.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ppfl::distortion {

using numkit::ParamVector;

namespace {

// Boundary comparisons tolerate a few ulp so that a vector scaled onto the
// shell re-projects to itself bit for bit.
constexpr double kBoundarySlack = 4.0 * std::numeric_limits<double>::epsilon();

ParamVector unit_direction(std::size_t dim, std::uint64_t seed) {
  RngStream rng(seed);
  ParamVector dir = ParamVector::zeros(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (std::size_t i = 0; i < dim; ++i) dir[i] = rng.normal();
    n = dir.norm();
  }
  dir *= 1.0 / n;
  return dir;
}

}  // namespace

ParamVector project_shell(const ParamVector& v, const privacy::ShellBounds& b,
                          const ParamVector& fallback_dir) {
  if (b.lower < 0.0 || b.upper < b.lower) throw ParamError("project_shell: need 0 <= l <= u");
  if (fallback_dir.size() != v.size()) {
    throw ShapeError("project_shell: fallback direction length mismatch");
  }
  const double n = v.norm();
  if (n > b.upper * (1.0 + kBoundarySlack)) {
    ParamVector out = v;
    out *= b.upper / n;
    return out;
  }
  if (n < b.lower * (1.0 - kBoundarySlack)) {
    if (n == 0.0) {
      ParamVector out = fallback_dir;
      out *= b.lower;
      return out;
    }
    ParamVector out = v;
    out *= b.lower / n;
    return out;
  }
  return v;
}

ParamVector learn_distortion(const GradFn& grad_at, const ParamVector& w,
                             const privacy::ShellBounds& b, const LearnerConfig& cfg,
                             const ParamVector* init, std::vector<ParamVector>* iterates) {
  if (cfg.iterations < 0) throw ParamError("learn_distortion: iterations must be >= 0");
  if (!(cfg.step_size > 0.0)) throw ParamError("learn_distortion: step size must be positive");
  if (b.lower < 0.0 || b.upper < b.lower) throw ParamError("learn_distortion: need 0 <= l <= u");

  if (!(b.upper > 0.0)) return ParamVector::zeros_like(w);

  const ParamVector fallback = unit_direction(w.size(), cfg.fallback_dir_seed);
  ParamVector delta = init ? *init : ParamVector::zeros_like(w);
  if (delta.size() != w.size()) throw ShapeError("learn_distortion: init length mismatch");

  numkit::AdamState adam = numkit::AdamState::init(w.size());
  for (int m = 0; m < cfg.iterations; ++m) {
    ParamVector g = grad_at(delta);
    if (g.size() != w.size()) throw ShapeError("learn_distortion: gradient length mismatch");
    numkit::ensure_finite(g, "learn_distortion gradient");
    if (cfg.norm_reward > 0.0) {
      const double n = delta.norm();
      if (n > 0.0) {
        // d/d(delta) of -norm_reward * ||delta||
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= cfg.norm_reward * delta[i] / n;
      }
    }
    if (cfg.optimizer == Optimizer::PlainGd) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= cfg.step_size * g[i];
    } else {
      auto update = numkit::adam_step(adam, g, cfg.step_size);
      adam = std::move(update.state);
      delta += update.step;
    }
    delta = project_shell(delta, b, fallback);
    if (iterates) iterates->push_back(delta);
  }
  return delta;
}

ParamVector identical_pl(const privacy::ShellBounds& b, std::size_t dim, RngStream& rng) {
  if (b.lower < 0.0 || b.upper < b.lower) throw ParamError("identical_pl: need 0 <= l <= u");
  if (dim == 0) throw ParamError("identical_pl: dim must be positive");
  const double magnitude = b.lower / std::sqrt(static_cast<double>(dim));
  ParamVector out = ParamVector::zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = rng.sign() * magnitude;
  return out;
}

ParamVector identical_dp(double scale_b, std::size_t dim, RngStream& rng) {
  if (!(scale_b >= 0.0)) throw ParamError("identical_dp: scale must be non-negative");
  if (dim == 0) throw ParamError("identical_dp: dim must be positive");
  ParamVector out = ParamVector::zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = rng.laplace(scale_b);
  return out;
}

ParamVector make_distortion(MechanismKind kind, const GradFn& grad_at, const ParamVector& w,
                            const privacy::PrivacyBudget& budget,
                            const privacy::PrivacyConstants& constants, privacy::DpParams dp,
                            const LearnerConfig& cfg, RngStream& rng) {
  const bool wants_pl = kind == MechanismKind::PlLearn || kind == MechanismKind::PlIdentical;
  if (wants_pl != (budget.framework == privacy::Framework::DistributionFree)) {
    throw ConfigError("make_distortion: mechanism and budget framework disagree");
  }
  dp.dim = static_cast<int>(w.size());

  switch (kind) {
    case MechanismKind::PlLearn: {
      const auto b = privacy::shell_bounds(budget, constants, dp);
      ParamVector delta = learn_distortion(grad_at, w, b, cfg);
      delta.shapes = w.shapes;
      return delta;
    }
    case MechanismKind::PlIdentical: {
      const auto b = privacy::shell_bounds(budget, constants, dp);
      ParamVector delta = identical_pl(b, w.size(), rng);
      delta.shapes = w.shapes;
      return delta;
    }
    case MechanismKind::DpLearn: {
      const auto b = privacy::shell_bounds(budget, constants, dp);
      const double scale = 1.0 / privacy::invert_budget_dp(budget.chi, dp);
      ParamVector start = identical_dp(scale, w.size(), rng);
      ParamVector delta = learn_distortion(grad_at, w, b, cfg, &start);
      delta.shapes = w.shapes;
      return delta;
    }
    case MechanismKind::DpIdentical: {
      const double scale = 1.0 / privacy::invert_budget_dp(budget.chi, dp);
      ParamVector delta = identical_dp(scale, w.size(), rng);
      delta.shapes = w.shapes;
      return delta;
    }
  }
  throw ParamError("make_distortion: unknown mechanism");
}

}  // namespace ppfl::distortion
