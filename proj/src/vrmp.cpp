#include "ldacp/vrmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldacp/nn.hpp"

namespace ldacp {

long double pcoc_label(double z, std::int64_t y) {
  static_assert(std::numeric_limits<long double>::digits >= 64, "needs x87 extended precision");
  return y > 0 ? static_cast<long double>(z) / static_cast<long double>(y) : 1.0L;
}

double predict_pcoc(double raw) { return std::clamp(nn::softplus(raw), kPcocMin, kPcocMax); }

double predict_pcoc_derivative(double raw) {
  const double s = nn::softplus(raw);
  if (s < kPcocMin || s > kPcocMax) return 0.0;
  return nn::sigmoid(raw);
}

double vrmp_loss(double pcoc_hat, double pcoc) { return std::abs(pcoc_hat - pcoc); }

double infer_yg(double z, long double pcoc_hat) { return static_cast<double>(static_cast<long double>(z) / pcoc_hat); }

}  // namespace ldacp
