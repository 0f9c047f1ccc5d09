#pragma once

// Value regression with proxy labels: the ranking model's predicted-over-
// observed ratio is learned instead of the long-tailed count.

#include <cstdint>

namespace ldacp {

inline constexpr double kPcocMin = 0.1;
inline constexpr double kPcocMax = 10.0;

// z / y for y > 0, otherwise 1. Held in extended precision so that
// infer_yg(z, pcoc_label(z, y)) rounds back to y exactly; a double
// quotient misses by one ulp for a few percent of (z, y) pairs.
long double pcoc_label(double z, std::int64_t y);

// softplus(raw) clamped to [kPcocMin, kPcocMax].
double predict_pcoc(double raw);
// d predict_pcoc / d raw; zero where the clamp is active.
double predict_pcoc_derivative(double raw);

double vrmp_loss(double pcoc_hat, double pcoc);

// z / pcoc_hat, divided in extended precision and rounded once.
double infer_yg(double z, long double pcoc_hat);

struct VrmpPrediction {
  double pcoc_hat = 1.0;
  double y_g = 0.0;
};

}  // namespace ldacp
