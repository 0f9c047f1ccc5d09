#pragma once

// Synthetic campaign generator. Reproduces long-tailed conversion counts, a
// narrow ranking-model bias (PCOC), delayed conversion tracking and the four
// feature groups (profile, effect counts, bias priors, churn rates).
//
// Simulation assumption: the aggregated pCTCVR couples the campaign's bias to
// its realized conversions, z = b * ((1 - rho) * y + rho * E[y]) * noise, so
// the proxy-label task is learnable.

#include <cstdint>
#include <random>
#include <vector>

#include "ldacp/dataset.hpp"
#include "ldacp/delay.hpp"

namespace ldacp {

struct GeneratorConfig {
  std::int64_t n_samples = 100000;
  std::uint64_t seed = 42;

  // Campaign scale (expected conversions): log-normal body with a Pareto tail.
  double scale_log_mean = 1.5;
  double scale_log_sigma = 1.8;
  double tail_probability = 0.03;
  double tail_exponent = 1.3;
  double tail_scale = 15.0;
  double max_scale = 40000.0;

  // Ranking bias b ~ log-normal(0, bias_sigma), decomposed into industry,
  // product, account and per-campaign residual factors by variance share.
  double bias_sigma = 0.35;
  double bias_share_industry = 0.10;
  double bias_share_product = 0.45;
  double bias_share_account = 0.35;  // residual share is what remains
  double prior_noise_sigma = 0.05;   // log-space noise on the bias prior features

  // z construction.
  double z_expected_share = 0.5;  // rho
  double z_noise_sigma = 0.05;

  // Delays and windows.
  double delay_spread_sigma = 0.3;   // per-campaign multiplier on top of the account factor
  double account_delay_sigma = 0.4;  // per-account delay multiplier
  double window_min_minutes = 30.0;
  double window_max_minutes = 4320.0;
  double label_horizon_minutes = 4320.0;

  int n_products = 1141;
  int n_objectives = 8;
  int n_accounts = 3000;
  int n_days = 8;

  std::int64_t shard_size = 10000;

  // Calibration targets are asserted when n_samples >= calibration_min_samples.
  bool check_calibration = true;
  std::int64_t calibration_min_samples = 100000;

  void validate() const;
};

struct CalibrationStats {
  double label_mean = 0.0;
  double label_median = 0.0;
  double label_max = 0.0;
  double zero_fraction = 0.0;
  double pcoc_p50 = 0.0;
  double pcoc_p99 = 0.0;
};

CalibrationStats calibration_stats(const Dataset& data);

// Throws std::runtime_error naming the first violated calibration target.
void check_calibration_targets(const CalibrationStats& stats);

// Static, per-campaign attributes (shared with the bidding simulator).
struct CampaignProfile {
  Industry industry = Industry::kGames;
  std::int32_t product_id = 1;
  std::int32_t objective_id = 0;
  CampaignType campaign_type = CampaignType::kApp;
  double bias = 1.0;  // true ranking-model PCOC
  double pcoc_prior_industry = 1.0;
  double pcoc_prior_product = 1.0;
  double pcoc_prior_account = 1.0;
  double churn_industry = 0.0;
  double churn_product = 0.0;
  double churn_account = 0.0;
  double delay_multiplier = 1.0;
  double conversion_per_click = 0.05;
  double click_through_rate = 0.02;
  double view_rate = 0.5;
};

// Latent per-industry / product / account factors drawn once from the seed.
class CampaignWorld {
 public:
  explicit CampaignWorld(const GeneratorConfig& config);

  CampaignProfile draw_profile(std::mt19937_64& rng) const;

 private:
  struct Entity {
    double log_bias = 0.0;
    double churn = 0.0;
    double log_delay = 0.0;
    int industry = 0;
  };
  GeneratorConfig config_;
  std::vector<Entity> industries_;
  std::vector<Entity> products_;
  std::vector<Entity> accounts_;
};

// Deterministic per seed; shards of shard_size samples use independent
// streams derived from the master seed and are concatenated in order.
Dataset generate_campaigns(const GeneratorConfig& config, const DelayModel& delays = DelayModel());

// Conversions tracked by the end of a window of `window` minutes, given each
// conversion's impression offset as a fraction of the window and its delay.
std::int64_t tracked_within(std::span<const double> impression_fraction, std::span<const double> delay,
                            double window, double horizon);

}  // namespace ldacp
