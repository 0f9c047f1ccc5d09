#pragma once

// Impression-to-conversion delay distributions, as piecewise-linear inverse
// CDFs through published deciles (minutes).

#include <array>

#include "ldacp/campaign.hpp"

namespace ldacp {

// p10 .. p90 in minutes.
using DelayDeciles = std::array<double, 9>;

class DelayModel {
 public:
  // Paid-objective deciles per campaign type.
  DelayModel();

  static DelayModel zero();

  const DelayDeciles& deciles(CampaignType t) const;
  void set_deciles(CampaignType t, const DelayDeciles& d);

  // Inverse CDF: linear between deciles, from 0 at u = 0 up to p10 and from
  // p90 up to 2 * p90 at u = 1.
  double sample(CampaignType t, double u) const;
  // Fraction of delays <= minutes.
  double cdf(CampaignType t, double minutes) const;

 private:
  std::array<DelayDeciles, kNumCampaignTypes> tables_;
};

// Uses the default tables.
double sample_delay(CampaignType t, double u);

}  // namespace ldacp
