#include "ldacp/delay.hpp"

#include <algorithm>
#include <stdexcept>

namespace ldacp {

namespace {

std::size_t table_index(CampaignType t) {
  const int i = index_of(t);
  if (i < 0 || i >= kNumCampaignTypes) throw std::invalid_argument("delay: unknown campaign type");
  return static_cast<std::size_t>(i);
}

// Knots (u, minutes) at u = 0, 0.1, ..., 1.0.
std::array<double, 11> knots(const DelayDeciles& d) {
  std::array<double, 11> k{};
  k[0] = 0.0;
  for (std::size_t i = 0; i < 9; ++i) k[i + 1] = d[i];
  k[10] = 2.0 * d[8];
  return k;
}

}  // namespace

DelayModel::DelayModel() {
  tables_[table_index(CampaignType::kApp)] = {7, 11, 17, 27, 46, 103, 305, 999, 2770};
  tables_[table_index(CampaignType::kAppAdvance)] = {1, 3, 5, 7, 20, 88, 294, 569, 931};
  tables_[table_index(CampaignType::kSitePage)] = {3, 4, 5, 7, 9, 13, 18, 29, 74};
  tables_[table_index(CampaignType::kLiveStream)] = {9, 18, 26, 35, 50, 85, 269, 1176, 4434};
}

DelayModel DelayModel::zero() {
  DelayModel m;
  for (auto& t : m.tables_) t.fill(0.0);
  return m;
}

const DelayDeciles& DelayModel::deciles(CampaignType t) const { return tables_[table_index(t)]; }

void DelayModel::set_deciles(CampaignType t, const DelayDeciles& d) {
  if (!std::is_sorted(d.begin(), d.end()) || d.front() < 0.0) {
    throw std::invalid_argument("delay deciles must be non-negative and non-decreasing");
  }
  tables_[table_index(t)] = d;
}

double DelayModel::sample(CampaignType t, double u) const {
  const auto k = knots(deciles(t));
  u = std::clamp(u, 0.0, 1.0);
  const double pos = u * 10.0;
  const auto seg = std::min<std::size_t>(static_cast<std::size_t>(pos), 9);
  const double frac = pos - static_cast<double>(seg);
  return k[seg] + frac * (k[seg + 1] - k[seg]);
}

double DelayModel::cdf(CampaignType t, double minutes) const {
  const auto k = knots(deciles(t));
  if (minutes < 0.0) return 0.0;
  if (minutes >= k[10]) return 1.0;
  // Last knot not exceeding `minutes`, so flat stretches resolve to their upper end.
  std::size_t seg = 0;
  while (seg < 9 && k[seg + 1] <= minutes) ++seg;
  const double width = k[seg + 1] - k[seg];
  const double frac = width > 0.0 ? (minutes - k[seg]) / width : 1.0;
  return (static_cast<double>(seg) + frac) / 10.0;
}

double sample_delay(CampaignType t, double u) {
  static const DelayModel model;
  return model.sample(t, u);
}

}  // namespace ldacp
