#include "ppfl/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ppfl::privacy {

namespace {

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ParamError(std::string(name) + " must be positive");
}

// I^(p-1) with the I = 0 attacker mapped to zero influence.
double rounds_term(const PrivacyConstants& c) {
  if (c.attack_rounds == 0) return 0.0;
  return std::pow(static_cast<double>(c.attack_rounds), c.p - 1.0);
}

}  // namespace

void PrivacyConstants::validate() const {
  check_positive(c_a, "c_a");
  check_positive(c_b, "c_b");
  check_positive(c_0, "c_0");
  check_positive(c_2, "c_2");
  check_positive(data_diameter, "data_diameter");
  if (!(p > 0.0) || !(p < 1.0)) throw ParamError("p must lie in (0, 1)");
  if (attack_rounds < 0) throw ParamError("attack_rounds must be non-negative");
}

void DpParams::validate() const {
  check_positive(eta, "eta");
  check_positive(sensitivity, "sensitivity");
  if (dim <= 0) throw ParamError("dim must be positive");
}

double leakage_pl(double delta_norm, const PrivacyConstants& c) {
  c.validate();
  if (delta_norm < 0.0) throw ParamError("delta_norm must be non-negative");
  if (c.attack_rounds == 0) return 0.0;
  const double raw =
      1.0 - (c.c_a * delta_norm + c.c_a * c.c_0 * rounds_term(c)) / (2.0 * c.data_diameter);
  return std::clamp(raw, 0.0, 1.0);
}

double invert_budget_pl(double chi, const PrivacyConstants& c) {
  c.validate();
  if (chi < 0.0 || chi > 1.0) throw ParamError("chi must lie in [0, 1]");
  const double a1 = 1.0 - c.c_a * c.c_0 * rounds_term(c) / (2.0 * c.data_diameter);
  const double a2 = c.c_a / (2.0 * c.data_diameter);
  return std::max(0.0, (a1 - chi) / a2);
}

double leakage_dp(double sigma, const DpParams& d) {
  d.validate();
  check_positive(sigma, "sigma");
  return d.eta * d.sensitivity * sigma;
}

double invert_budget_dp(double chi, const DpParams& d) {
  d.validate();
  check_positive(chi, "chi");
  return chi / (d.eta * d.sensitivity);
}

ShellBounds shell_bounds(const PrivacyBudget& budget, const PrivacyConstants& c,
                         const DpParams& d) {
  ShellBounds out;
  if (budget.framework == Framework::DistributionFree) {
    out.lower = invert_budget_pl(budget.chi, c);
  } else {
    const double sigma = invert_budget_dp(budget.chi, d);
    const double scale = 1.0 / sigma;
    out.lower = scale * std::sqrt(2.0 * d.dim);
  }
  out.upper = 2.0 * out.lower;
  return out;
}

LeakageBound leakage_upper_bound(double delta_norm, const PrivacyConstants& c,
                                 BoundDenominator denom) {
  c.validate();
  if (delta_norm < 0.0) throw ParamError("delta_norm must be non-negative");
  LeakageBound out;
  if (c.attack_rounds == 0) return out;
  const double term = rounds_term(c);
  const double denominator =
      (denom == BoundDenominator::TwoD ? 2.0 : 4.0) * c.data_diameter;
  out.value = std::clamp(1.0 - (c.c_a * delta_norm + c.c_a * c.c_0 * term) / denominator, 0.0, 1.0);
  const bool large_branch = delta_norm >= (2.0 * c.c_2 * c.c_b / c.c_a) * term;
  const bool small_branch = delta_norm <= (c.c_a * c.c_0 / (2.0 * c.c_b)) * term;
  out.condition_met = large_branch || small_branch;
  return out;
}

}  // namespace ppfl::privacy
