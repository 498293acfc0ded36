#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ppfl/numkit.hpp"
#include "ppfl/privacy.hpp"
#include "ppfl/rng.hpp"

namespace ppfl::distortion {

enum class Optimizer { PlainGd, AdaptiveMoment };

struct LearnerConfig {
  int iterations = 10;        // M
  double step_size = 0.1;     // gamma
  double norm_reward = 0.01;  // weight of the -||delta|| objective term
  Optimizer optimizer = Optimizer::AdaptiveMoment;
  std::uint64_t fallback_dir_seed = 0;
};

enum class MechanismKind { PlLearn, PlIdentical, DpLearn, DpIdentical };

// Gradient of the client loss at (W + delta), as a function of delta.
using GradFn = std::function<numkit::ParamVector(const numkit::ParamVector&)>;

// Radial projection onto {l <= ||v|| <= u}.  The zero vector has no direction,
// so it lands on l * fallback_dir; fallback_dir must be unit length.  Vectors
// already inside the shell (up to a few ulp of the boundary) pass through
// unchanged, which makes the projection exactly idempotent.
numkit::ParamVector project_shell(const numkit::ParamVector& v, const privacy::ShellBounds& b,
                                  const numkit::ParamVector& fallback_dir);

// Distortion learning: projected descent of M steps on
//   L(W + delta) - norm_reward * ||delta||
// starting from init (zero when absent), each iterate projected onto the
// shell.  A degenerate shell (u <= 0) yields the zero distortion.  When
// iterates is non-null every post-projection iterate is appended.
numkit::ParamVector learn_distortion(const GradFn& grad_at, const numkit::ParamVector& w,
                                     const privacy::ShellBounds& b, const LearnerConfig& cfg,
                                     const numkit::ParamVector* init = nullptr,
                                     std::vector<numkit::ParamVector>* iterates = nullptr);

// Budget-matched baseline for the distribution-free framework: every
// coordinate is +-(l / sqrt(dim)) with signs drawn from rng, so the norm is l.
numkit::ParamVector identical_pl(const privacy::ShellBounds& b, std::size_t dim, RngStream& rng);

// Budget-matched baseline for the Laplacian framework: iid Laplace(0, scale_b)
// coordinates, no projection.
numkit::ParamVector identical_dp(double scale_b, std::size_t dim, RngStream& rng);

// Dispatches on the mechanism: shell bounds from the budget, then either the
// learner (Learn variants) or a fresh noise draw (Identical variants).  The
// Laplacian learner variant starts from a Laplace sample instead of zero.
numkit::ParamVector make_distortion(MechanismKind kind, const GradFn& grad_at,
                                    const numkit::ParamVector& w,
                                    const privacy::PrivacyBudget& budget,
                                    const privacy::PrivacyConstants& constants,
                                    privacy::DpParams dp, const LearnerConfig& cfg,
                                    RngStream& rng);

}  // namespace ppfl::distortion
