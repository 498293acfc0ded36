#pragma once

#include "ppfl/errors.hpp"

namespace ppfl::privacy {

// Constants of the distribution-independent leakage model.  attack_rounds is
// the attacker's iteration count I; data_diameter D is the largest distance
// between two data points the attacker is assumed to distinguish.
struct PrivacyConstants {
  double c_a = 1.0;
  double c_b = 1.0;
  double c_0 = 1.0;
  double c_2 = 1.0;
  double p = 0.5;              // attack convergence-rate exponent, in (0, 1)
  double data_diameter = 1.0;  // D
  int attack_rounds = 1600;    // I

  void validate() const;
};

// Laplacian-noise framework parameters: eta is the learning rate the noise is
// calibrated against, sensitivity is the gradient clip threshold, dim is the
// number of noised coordinates.
struct DpParams {
  double eta = 0.1;
  double sensitivity = 500.0;
  int dim = 0;

  void validate() const;
};

// Norm shell {l <= ||delta|| <= u} for admissible distortions.
struct ShellBounds {
  double lower = 0.0;
  double upper = 0.0;
};

enum class Framework { DistributionFree, LaplacianDp };

struct PrivacyBudget {
  double chi = 0.0;
  Framework framework = Framework::DistributionFree;
};

// Leakage under a distortion of norm delta_norm:
//   1 - (c_a * delta + c_a * c_0 * I^(p-1)) / (2 D), clamped to [0, 1].
// Zero attack rounds mean the attacker never updates, so leakage is 0.
double leakage_pl(double delta_norm, const PrivacyConstants& c);

// Smallest distortion norm whose leakage does not exceed chi.  Writing the
// leakage line as a1 - a2 * delta, this is max(0, (a1 - chi) / a2).
double invert_budget_pl(double chi, const PrivacyConstants& c);

// Laplacian-noise leakage: eta * sensitivity * sigma, where sigma is the
// inverse of the per-coordinate noise scale b.
double leakage_dp(double sigma, const DpParams& d);

// Inverse of leakage_dp: the largest admissible sigma for budget chi.
double invert_budget_dp(double chi, const DpParams& d);

// Admissible-distortion shell for a budget.  Distribution-free: l is the
// minimal distortion norm, u = 2l.  Laplacian: the noise scale b = 1/sigma
// gives an expected squared norm of dim * 2 b^2, so l = b * sqrt(2 dim).
ShellBounds shell_bounds(const PrivacyBudget& budget, const PrivacyConstants& c,
                         const DpParams& d);

enum class BoundDenominator { TwoD, FourD };

struct LeakageBound {
  double value = 0.0;
  // False when delta_norm falls in the gap where neither sufficient condition
  // for the bound holds; the value is still reported.
  bool condition_met = true;
};

// Upper bound on leakage with a selectable denominator (2D or 4D).  The bound
// applies when delta >= (2 c_2 c_b / c_a) I^(p-1) or delta <= (c_a c_0 / (2 c_b)) I^(p-1).
LeakageBound leakage_upper_bound(double delta_norm, const PrivacyConstants& c,
                                 BoundDenominator denom);

}  // namespace ppfl::privacy
