#include "ldacp/moe.hpp"

#include <algorithm>
#include <cmath>

#include "ldacp/nn.hpp"

namespace ldacp {

double gate(double raw) { return nn::sigmoid(raw); }

double combine(double lambda, double y_f, double y_g) { return lambda * y_f + (1.0 - lambda) * y_g; }

double moe_loss(double lambda, double y_f, double y_g, double y, double eps_y) {
  const double denom = y + eps_y;
  return std::abs(lambda * y_f / denom + (1.0 - lambda) * y_g / denom - y / denom);
}

MoeGradient moe_loss_gradient(double lambda, double y_f, double y_g, double y, double eps_y) {
  const double denom = y + eps_y;
  const double r = lambda * y_f / denom + (1.0 - lambda) * y_g / denom - y / denom;
  const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  return {sign * (y_f - y_g) / denom, sign * lambda / denom, sign * (1.0 - lambda) / denom};
}

double total_loss(double bcms, double vrmp, double moe, double alpha, double beta) {
  return bcms + alpha * vrmp + beta * moe;
}

double clamp_prediction(double y_hat, std::int64_t tracked) {
  return std::max(y_hat, static_cast<double>(tracked));
}

}  // namespace ldacp
