#pragma once

#include <string>
#include <vector>

#include "ppfl/errors.hpp"

namespace ppfl::metrics {

// One protected run inside a budget sweep, as consumed by the CAP summary.
struct SweepPoint {
  double budget = 0.0;
  double accuracy = 0.0;
  double recovery_error = 0.0;  // attacker's reconstruction error, MSE
  double leakage = 0.0;
  double mse = 0.0;
  double ssim = 0.0;
};

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

double mse(const std::vector<double>& a, const std::vector<double>& b);

// Projection onto the feature domain [lo, hi], applied to attack estimates
// before image-space metrics so diverged reconstructions score like any other
// wrong point of the domain instead of dominating the averages.
std::vector<double> clamp_to_range(std::vector<double> v, double lo, double hi);

// Single-window SSIM over the whole signal with the usual stabilizers
// C1 = (0.01 L)^2 and C2 = (0.03 L)^2 for dynamic range L.
double ssim(const std::vector<double>& a, const std::vector<double>& b, double dynamic_range);

// Reconstruction batches are scored per datum and averaged, the usual
// image-metric protocol.  Requires a whole number of rows.
double ssim_rows(const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t row_len, double dynamic_range);

// Composite accuracy-privacy score: mean over points of accuracy * recovery
// error.  Higher is better (accurate model, badly failed attack).
double cap(const std::vector<SweepPoint>& points);

}  // namespace ppfl::metrics
