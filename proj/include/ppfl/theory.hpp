#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppfl/federation.hpp"
#include "ppfl/numkit.hpp"
#include "ppfl/privacy.hpp"
#include "ppfl/rng.hpp"

namespace ppfl::theory {

using LossFn = std::function<double(const numkit::ParamVector&)>;
using GradFn = std::function<numkit::ParamVector(const numkit::ParamVector&)>;

// Empirical curvature estimates for a loss over a sampled parameter region.
struct SmoothnessProbe {
  double lipschitz = 0.0;         // L: max ||g(x) - g(y)|| / ||x - y|| over pairs
  double curvature_floor = 0.0;   // R: min directional curvature, clamped at 0
  double max_grad_norm = 0.0;     // C_g over the sampled region
  int samples = 0;
};

SmoothnessProbe probe_smoothness_fn(const GradFn& grad, std::size_t dim,
                                    const numkit::ParamVector& center, double radius,
                                    int samples, std::uint64_t seed);

// Probe for a model loss over its full dataset, sampled around `center`.
SmoothnessProbe probe_smoothness(const numkit::ModelSpec& spec, const numkit::Matrix& inputs,
                                 const numkit::Matrix& labels, const numkit::ParamVector& center,
                                 double radius, int samples, std::uint64_t seed);

struct ShellSearchResult {
  numkit::ParamVector delta;
  double loss = 0.0;
};

// Reference optimum: minimizes loss(w + delta) over {l <= ||delta|| <= u} by
// random direction x radius sampling followed by projected coordinate-free
// descent (finite-difference gradient).  Independent of the learner's code
// path, so it can serve as its oracle.
ShellSearchResult brute_force_optimal_distortion(const LossFn& loss, const numkit::ParamVector& w,
                                                 const privacy::ShellBounds& b, int samples,
                                                 int refine_steps, std::uint64_t seed);

// Exact minimizer of 0.5 (x - c)' A (x - c) over the ball ||x|| <= r, for
// A = Q diag(eig) Q' given in its eigenbasis.  Interior solutions are c
// itself; boundary solutions come from bisection on the shifted system.
numkit::ParamVector quadratic_ball_minimizer(const std::vector<numkit::ParamVector>& q_cols,
                                             const std::vector<double>& eigenvalues,
                                             const numkit::ParamVector& c, double radius);

struct CheckRow {
  std::string check;
  int round = -1;   // -1 when the row is not tied to a round
  int client = -1;  // likewise
  double observed = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct TheoryReport {
  bool passed = true;
  std::vector<CheckRow> rows;

  void add(const std::string& check, int round, int client, double observed, double bound);
};

// Step-by-step distance contraction of projected descent on a strongly convex
// quadratic over a ball.  Each row compares the squared-distance ratio
// ||d_{m+1} - d*||^2 / ||d_m - d*||^2 against 1 - R/L.
struct QuadraticProblem {
  std::vector<numkit::ParamVector> q_cols;  // orthonormal eigenbasis
  std::vector<double> eigenvalues;
  numkit::ParamVector c;  // unconstrained minimizer

  double loss(const numkit::ParamVector& x) const;
  numkit::ParamVector grad(const numkit::ParamVector& x) const;
  static QuadraticProblem random(std::size_t dim, double eig_lo, double eig_hi,
                                 double center_norm, std::uint64_t seed);
};

void check_contraction(const QuadraticProblem& problem, double radius, int steps,
                       TheoryReport& report, int tag);

struct NearOptimalityConfig {
  int clients = 4;
  int rounds = 10;
  std::size_t dim = 6;
  double eig_lo = 2.0;
  double eig_hi = 3.0;
  double shell_lower = 0.5;
  double shell_upper = 1.0;  // Gamma
  double eta = 0.05;
  int oracle_samples = 100000;
  int oracle_refine_steps = 60;
  std::uint64_t seed = 1;
  double slack = 1e-3;
};

// Runs a quadratic federation and checks, per round and client, that the
// learner's utility loss exceeds the shell-optimal utility loss by at most
// C / (2 T^2) plus the oracle slack, with M = ceil((L/R) log(2 T Gamma^2))
// learner steps.  Also re-checks the per-step contraction on the ball.
TheoryReport verify_near_optimality(const NearOptimalityConfig& cfg);

// Learner iteration count that the near-optimality guarantee asks for.
int required_learner_steps(double lipschitz, double curvature, int rounds, double gamma_cap);

// Checks the averaged squared-gradient-norm bound on a finished trajectory:
//   mean_t (eta/2) ||grad L(W_t)||^2
//     <= (L(W_0) - L(W_T)) / T + mean_t (eta C_g^2 + eta^2 L C_g^2
//        + L ||delta_t*||^2 + 2 L / T^2).
// Requires the trajectory to carry the per-round optimal-distortion norms.
TheoryReport verify_convergence_bound(const federation::Trajectory& trajectory,
                                      const SmoothnessProbe& probe, double eta);

}  // namespace ppfl::theory
