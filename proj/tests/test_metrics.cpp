#include <vector>

#include "doctest.h"
#include "ppfl/metrics.hpp"
#include "ppfl/rng.hpp"

using namespace ppfl;
using namespace ppfl::metrics;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("accuracy counts exact matches") {
  CHECK(accuracy({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0);
  CHECK(accuracy({1, 2, 3, 4}, {1, 0, 3, 0}) == 0.5);
  CHECK(accuracy({0}, {1}) == 0.0);
  CHECK_THROWS_AS(accuracy({1, 2}, {1}), ShapeError);
  CHECK_THROWS_AS(accuracy({}, {}), ParamError);
}

TEST_CASE("mse of a signal with itself is exactly zero") {
  const std::vector<double> a{0.25, 0.5, 0.75, 1.0};
  CHECK(mse(a, a) == 0.0);
  CHECK(mse({0.0, 0.0}, {1.0, 3.0}) == doctest::Approx(5.0));
  CHECK_THROWS_AS(mse({1.0}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(mse({}, {}), ParamError);
}

TEST_CASE("ssim of a signal with itself is exactly one") {
  const std::vector<double> a{0.1, 0.9, 0.4, 0.3, 0.7};
  CHECK(ssim(a, a, 1.0) == 1.0);
}

TEST_CASE("ssim is symmetric and bounded by one") {
  RngStream rng(600);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(12), b(12);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    const double ab = ssim(a, b, 1.0);
    CHECK(ab == doctest::Approx(ssim(b, a, 1.0)).epsilon(1e-14));
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(ab >= -1.0 - 1e-12);
  }
}

TEST_CASE("ssim penalizes mean and structure differences") {
  const std::vector<double> base{0.2, 0.8, 0.5, 0.1, 0.9, 0.4};
  std::vector<double> shifted = base;
  for (auto& v : shifted) v += 0.4;
  CHECK(ssim(base, shifted, 1.0) < 0.9);
  std::vector<double> inverted = base;
  for (auto& v : inverted) v = 1.0 - v;
  CHECK(ssim(base, inverted, 1.0) < 0.0);
}

TEST_CASE("ssim validates its inputs") {
  CHECK_THROWS_AS(ssim({1.0}, {1.0, 2.0}, 1.0), ShapeError);
  CHECK_THROWS_AS(ssim({}, {}, 1.0), ParamError);
  CHECK_THROWS_AS(ssim({1.0}, {1.0}, 0.0), ParamError);
}

TEST_CASE("clamp_to_range projects coordinatewise") {
  const auto out = clamp_to_range({-0.5, 0.25, 1.75, 1.0}, 0.0, 1.0);
  CHECK(out == std::vector<double>{0.0, 0.25, 1.0, 1.0});
  const auto same = clamp_to_range({0.1, 0.2}, 0.0, 1.0);
  CHECK(same == std::vector<double>{0.1, 0.2});
  CHECK_THROWS_AS(clamp_to_range({1.0}, 2.0, 1.0), ParamError);
}

TEST_CASE("ssim_rows averages per-row scores") {
  const std::vector<double> truth{0.1, 0.9, 0.4, 0.3, 0.7, 0.2};
  std::vector<double> half = truth;
  // Corrupt only the second row; the first row still scores 1.
  half[3] = 0.9;
  half[4] = 0.1;
  half[5] = 0.8;
  const double row0 = ssim({0.1, 0.9, 0.4}, {0.1, 0.9, 0.4}, 1.0);
  const double row1 = ssim({0.3, 0.7, 0.2}, {0.9, 0.1, 0.8}, 1.0);
  CHECK(ssim_rows(truth, half, 3, 1.0) == doctest::Approx(0.5 * (row0 + row1)).epsilon(1e-14));
  CHECK(ssim_rows(truth, truth, 3, 1.0) == 1.0);
  CHECK(ssim_rows(truth, truth, 6, 1.0) == 1.0);
  CHECK_THROWS_AS(ssim_rows(truth, truth, 4, 1.0), ShapeError);
  CHECK_THROWS_AS(ssim_rows(truth, truth, 0, 1.0), ShapeError);
  CHECK_THROWS_AS(ssim_rows({1.0, 2.0}, {1.0}, 1, 1.0), ShapeError);
}

TEST_CASE("cap averages accuracy-weighted recovery error") {
  SweepPoint p1;
  p1.accuracy = 0.9;
  p1.recovery_error = 2.0;
  SweepPoint p2;
  p2.accuracy = 0.8;
  p2.recovery_error = 3.0;
  CHECK(cap({p1, p2}) == doctest::Approx(2.1).epsilon(1e-15));
  SweepPoint single;
  single.accuracy = 0.9;
  single.recovery_error = 2.0;
  CHECK(cap({single}) == doctest::Approx(1.8).epsilon(1e-15));
  CHECK_THROWS_AS(cap({}), ParamError);
}

TEST_SUITE_END();
