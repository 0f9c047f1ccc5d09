#pragma once

#include <cstdint>

namespace ldacp {

struct FusionOutput {
  double lambda = 0.5;
  double y_f = 0.0;
  double y_g = 0.0;
  double y_hat = 0.0;
  double y_final = 0.0;  // y_hat clamped from below by tracked conversions
};

double gate(double raw);

double combine(double lambda, double y_f, double y_g);

// MAPE-form gate loss with denominator y + eps_y; for y > 0 and eps_y = 0
// this is |y_hat / y - 1|.
double moe_loss(double lambda, double y_f, double y_g, double y, double eps_y);

// d moe_loss / d lambda, d y_f, d y_g (subgradient 0 at the kink).
struct MoeGradient {
  double lambda = 0.0;
  double y_f = 0.0;
  double y_g = 0.0;
};
MoeGradient moe_loss_gradient(double lambda, double y_f, double y_g, double y, double eps_y);

double total_loss(double bcms, double vrmp, double moe, double alpha, double beta);

double clamp_prediction(double y_hat, std::int64_t tracked);

}  // namespace ldacp
