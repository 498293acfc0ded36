#include "ppfl/metrics.hpp"

#include <algorithm>
#include <cstddef>

namespace ppfl::metrics {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("accuracy: prediction and label counts differ");
  }
  if (predictions.empty()) throw ParamError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("mse: length mismatch");
  if (a.empty()) throw ParamError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

std::vector<double> clamp_to_range(std::vector<double> v, double lo, double hi) {
  if (!(lo <= hi)) throw ParamError("clamp_to_range: lo must not exceed hi");
  for (double& x : v) x = std::clamp(x, lo, hi);
  return v;
}

double ssim(const std::vector<double>& a, const std::vector<double>& b, double dynamic_range) {
  if (a.size() != b.size()) throw ShapeError("ssim: length mismatch");
  if (a.empty()) throw ParamError("ssim: empty input");
  if (!(dynamic_range > 0.0)) throw ParamError("ssim: dynamic range must be positive");
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  return ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2)) /
         ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2));
}

double ssim_rows(const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t row_len, double dynamic_range) {
  if (a.size() != b.size()) throw ShapeError("ssim_rows: length mismatch");
  if (row_len == 0 || a.size() % row_len != 0) {
    throw ShapeError("ssim_rows: signal length must be a multiple of the row length");
  }
  const std::size_t rows = a.size() / row_len;
  double s = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto first_a = a.begin() + static_cast<std::ptrdiff_t>(r * row_len);
    const auto first_b = b.begin() + static_cast<std::ptrdiff_t>(r * row_len);
    s += ssim(std::vector<double>(first_a, first_a + static_cast<std::ptrdiff_t>(row_len)),
              std::vector<double>(first_b, first_b + static_cast<std::ptrdiff_t>(row_len)),
              dynamic_range);
  }
  return s / static_cast<double>(rows);
}

double cap(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw ParamError("cap: no sweep points");
  double s = 0.0;
  for (const auto& p : points) s += p.accuracy * p.recovery_error;
  return s / static_cast<double>(points.size());
}

}  // namespace ppfl::metrics
