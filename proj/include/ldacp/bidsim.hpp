#pragma once

// Discrete-time auto-bidding loop under delayed conversion feedback. A
// controller rescales the CPA bid coefficient every interval from a
// conversion signal; paired control/experiment arms replay the same market
// draws so that only the signal policy differs.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "ldacp/delay.hpp"
#include "ldacp/generator.hpp"
#include "ldacp/model.hpp"

namespace ldacp {

struct ScenarioConfig {
  int campaigns = 200;
  double horizon_minutes = 1440.0;
  double interval_minutes = 10.0;
  int impressions_per_interval = 3000;  // offered traffic, split evenly between the arms
  double target_cpa = 100.0;
  double budget_factor = 2.0;  // budget per arm / cost of winning every offered impression at coefficient 1
  double coef_min = 0.1;
  double coef_max = 3.0;
  double step_clip_lo = 0.9;
  double step_clip_hi = 1.1;
  double win_scale = 0.7;  // win probability 1 - exp(-win_scale * coefficient)
  double cr_lo = 0.8;
  double cr_hi = 1.2;
  double z_expected_share = 0.5;  // as in the generator: z = b * ((1 - rho) * conversions + rho * expected)
  bool zero_delay = false;
  std::optional<CampaignType> campaign_type;  // delay row for every campaign; drawn per campaign when empty
  std::uint64_t seed = 7;
  GeneratorConfig world;  // entity draws for campaign profiles

  void validate() const;
  int intervals() const;
};

struct BidCampaign {
  CampaignProfile profile;
  double conversion_rate = 1e-3;  // per won impression
  double budget = 0.0;            // per arm
};

struct BidState {
  BidCampaign campaign;
  double coefficient = 1.0;
  double spent = 0.0;
  std::int64_t won = 0;
  std::int64_t clicks = 0;
  std::int64_t tracked = 0;
  std::int64_t true_conversions = 0;  // every conversion scheduled so far, tracked or pending
  double expected_conversions = 0.0;
  double clock = 0.0;
  bool complete = false;
  std::priority_queue<double, std::vector<double>, std::greater<>> pending;  // arrival times
  std::vector<double> coefficient_trace;  // after each step
  std::vector<double> signal_trace;

  explicit BidState(BidCampaign c) : campaign(std::move(c)) {}
};

// Uniform draws for one offered impression, shared by both arms.
struct ImpressionDraw {
  double time = 0.0;   // offset within the interval, fraction
  double win = 0.0;
  double outcome = 0.0;  // click if < ctr, conversion if < conversion_rate
  double delay = 0.0;
};

class ConversionPredictor {
 public:
  virtual ~ConversionPredictor() = default;
  // Estimated eventual conversions of the impressions won so far.
  virtual double predict(const BidState& state, const ScenarioConfig& scenario) const = 0;
};

// Knows the outcome of every won impression.
class OraclePredictor : public ConversionPredictor {
 public:
  double predict(const BidState& state, const ScenarioConfig& scenario) const override;
};

// Feeds the campaign's running aggregates to a trained model.
class ModelPredictor : public ConversionPredictor {
 public:
  explicit ModelPredictor(const Model& model) : model_(model) {}
  double predict(const BidState& state, const ScenarioConfig& scenario) const override;
  static CampaignSample features(const BidState& state, const ScenarioConfig& scenario);

 private:
  const Model& model_;
};

enum class SignalMode { kTracked, kPredicted, kOracle };

std::string to_string(SignalMode m);
SignalMode signal_mode_from_string(const std::string& s);

struct SignalPolicy {
  SignalMode mode = SignalMode::kTracked;
  const ConversionPredictor* predictor = nullptr;  // required for kPredicted

  // Predicted signals are clamped from below by tracked conversions.
  double signal(const BidState& state, const ScenarioConfig& scenario) const;
};

// Advances one adjustment interval: serves the offered impressions, promotes
// matured conversions to tracked, then rescales the coefficient by
// clip(target / (spent / max(signal, 1)), step_clip_lo, step_clip_hi).
void step(BidState& state, const SignalPolicy& policy, std::span<const ImpressionDraw> draws,
          const ScenarioConfig& scenario, const DelayModel& delays);

struct ArmCampaignResult {
  double cost_rate = 0.0;  // spent / eventual conversions / target CPA
  double spent = 0.0;
  std::int64_t conversions = 0;
  double final_coefficient = 0.0;
};

struct ArmSummary {
  std::string policy;
  std::vector<ArmCampaignResult> campaigns;
  double cr = 0.0;
  double total_spend = 0.0;
  std::int64_t total_conversions = 0;
  double cost_rate_mean = 0.0;
  double cost_rate_p10 = 0.0;
  double cost_rate_p50 = 0.0;
  double cost_rate_p90 = 0.0;
};

struct AbReport {
  ArmSummary control;
  ArmSummary experiment;
};

std::vector<BidCampaign> draw_bid_campaigns(const ScenarioConfig& scenario);

// Deterministic market draws for campaign c, interval k.
std::vector<ImpressionDraw> market_draws(const ScenarioConfig& scenario, int campaign, int interval);

// Runs one campaign to the horizon under a policy.
BidState simulate_campaign(const BidCampaign& campaign, int index, const SignalPolicy& policy,
                           const ScenarioConfig& scenario, const DelayModel& delays);

AbReport run_ab(const ScenarioConfig& scenario, const SignalPolicy& control, const SignalPolicy& experiment);

std::string format_ab_report(const AbReport& report);
void write_ab_report(const AbReport& report, const std::filesystem::path& dir);

}  // namespace ldacp
