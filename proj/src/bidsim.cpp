#include "ldacp/bidsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace ldacp {

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
  if (campaigns < 1) fail("campaigns must be >= 1");
  if (!(interval_minutes > 0.0)) fail("interval_minutes must be > 0");
  if (horizon_minutes < interval_minutes) fail("horizon_minutes must be at least one adjustment interval");
  if (impressions_per_interval < 2) fail("impressions_per_interval must be >= 2");
  if (!(target_cpa > 0.0)) fail("target_cpa must be > 0");
  if (!(budget_factor > 0.0)) fail("budget_factor must be > 0");
  if (!(coef_min > 0.0 && coef_min <= 1.0 && 1.0 <= coef_max)) fail("coefficient bounds must satisfy 0 < min <= 1 <= max");
  if (!(step_clip_lo > 0.0 && step_clip_lo <= 1.0 && 1.0 <= step_clip_hi)) fail("step clip must bracket 1");
  if (!(win_scale > 0.0)) fail("win_scale must be > 0");
  if (!(cr_lo < cr_hi)) fail("cr_lo must be below cr_hi");
  if (!(z_expected_share >= 0.0 && z_expected_share <= 1.0)) fail("z_expected_share must lie in [0, 1]");
  world.validate();
}

int ScenarioConfig::intervals() const { return static_cast<int>(std::floor(horizon_minutes / interval_minutes)); }

double OraclePredictor::predict(const BidState& state, const ScenarioConfig&) const {
  return static_cast<double>(state.true_conversions);
}

CampaignSample ModelPredictor::features(const BidState& state, const ScenarioConfig& scenario) {
  const CampaignProfile& p = state.campaign.profile;
  CampaignSample s;
  s.industry = p.industry;
  s.product_id = p.product_id;
  s.objective_id = p.objective_id;
  s.campaign_type = p.campaign_type;
  s.impressions = state.won;
  s.clicks = state.clicks;
  s.views = std::llround(static_cast<double>(state.won) * p.view_rate);
  s.tracked_conversions = state.tracked;
  const double rho = scenario.z_expected_share;
  const double blended = (1.0 - rho) * static_cast<double>(state.true_conversions) + rho * state.expected_conversions;
  s.z = state.won > 0 ? std::max(1e-3, p.bias * blended) : 0.0;
  s.pcoc_prior_industry = p.pcoc_prior_industry;
  s.pcoc_prior_product = p.pcoc_prior_product;
  s.pcoc_prior_account = p.pcoc_prior_account;
  s.churn_industry = p.churn_industry;
  s.churn_product = p.churn_product;
  s.churn_account = p.churn_account;
  s.t0 = 0.0;
  s.tk = state.clock;
  s.day = 1;
  s.label = state.tracked;  // unknown; only needs to satisfy label >= tracked
  return s;
}

double ModelPredictor::predict(const BidState& state, const ScenarioConfig& scenario) const {
  const CampaignSample s = features(state, scenario);
  return model_.predict(std::span<const CampaignSample>(&s, 1)).front().y_final;
}

std::string to_string(SignalMode m) {
  switch (m) {
    case SignalMode::kTracked: return "tracked";
    case SignalMode::kPredicted: return "predicted";
    case SignalMode::kOracle: return "oracle";
  }
  return "tracked";
}

SignalMode signal_mode_from_string(const std::string& s) {
  if (s == "tracked") return SignalMode::kTracked;
  if (s == "predicted") return SignalMode::kPredicted;
  if (s == "oracle") return SignalMode::kOracle;
  throw std::invalid_argument("unknown signal mode '" + s + "'");
}

double SignalPolicy::signal(const BidState& state, const ScenarioConfig& scenario) const {
  const auto tracked = static_cast<double>(state.tracked);
  switch (mode) {
    case SignalMode::kTracked: return tracked;
    case SignalMode::kOracle: return static_cast<double>(state.true_conversions);
    case SignalMode::kPredicted:
      if (!predictor) throw std::invalid_argument("predicted signal policy has no predictor");
      return std::max(predictor->predict(state, scenario), tracked);
  }
  return tracked;
}

void step(BidState& state, const SignalPolicy& policy, std::span<const ImpressionDraw> draws,
          const ScenarioConfig& scenario, const DelayModel& delays) {
  if (state.complete) return;
  const BidCampaign& c = state.campaign;
  const double win_prob = 1.0 - std::exp(-scenario.win_scale * state.coefficient);
  const double price = state.coefficient * scenario.target_cpa * c.profile.bias * c.conversion_rate;
  for (const ImpressionDraw& d : draws) {
    if (d.win >= win_prob) continue;
    if (state.spent + price > c.budget) {
      state.complete = true;
      break;
    }
    state.spent += price;
    ++state.won;
    state.expected_conversions += c.conversion_rate;
    if (d.outcome < c.profile.click_through_rate) ++state.clicks;
    if (d.outcome < c.conversion_rate) {
      ++state.true_conversions;
      const double at = state.clock + d.time * scenario.interval_minutes;
      state.pending.push(at + c.profile.delay_multiplier * delays.sample(c.profile.campaign_type, d.delay));
    }
  }
  state.clock += scenario.interval_minutes;
  while (!state.pending.empty() && state.pending.top() <= state.clock) {
    state.pending.pop();
    ++state.tracked;
  }
  const double signal = policy.signal(state, scenario);
  if (state.spent > 0.0) {
    const double cpa = state.spent / std::max(signal, 1.0);
    const double ratio = std::clamp(scenario.target_cpa / cpa, scenario.step_clip_lo, scenario.step_clip_hi);
    state.coefficient = std::clamp(state.coefficient * ratio, scenario.coef_min, scenario.coef_max);
  }
  state.coefficient_trace.push_back(state.coefficient);
  state.signal_trace.push_back(signal);
}

std::vector<BidCampaign> draw_bid_campaigns(const ScenarioConfig& scenario) {
  scenario.validate();
  const CampaignWorld world(scenario.world);
  std::seed_seq seq{static_cast<std::uint32_t>(scenario.seed), static_cast<std::uint32_t>(scenario.seed >> 32), 0xb1du};
  std::mt19937_64 rng(seq);
  const double offered = 0.5 * scenario.impressions_per_interval * scenario.intervals();
  std::vector<BidCampaign> out;
  for (int k = 0; k < scenario.campaigns; ++k) {
    BidCampaign c;
    c.profile = world.draw_profile(rng);
    if (scenario.campaign_type) c.profile.campaign_type = *scenario.campaign_type;
    c.conversion_rate = std::min(c.profile.click_through_rate,
                                 c.profile.click_through_rate * c.profile.conversion_per_click);
    c.budget = scenario.budget_factor * offered * scenario.target_cpa * c.profile.bias * c.conversion_rate;
    out.push_back(c);
  }
  return out;
}

std::vector<ImpressionDraw> market_draws(const ScenarioConfig& scenario, int campaign, int interval) {
  std::seed_seq seq{static_cast<std::uint32_t>(scenario.seed), static_cast<std::uint32_t>(scenario.seed >> 32),
                    static_cast<std::uint32_t>(campaign), static_cast<std::uint32_t>(interval), 0x3au};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ImpressionDraw> draws(static_cast<std::size_t>(scenario.impressions_per_interval / 2));
  for (auto& d : draws) {
    d.time = unit(rng);
    d.win = unit(rng);
    d.outcome = unit(rng);
    d.delay = unit(rng);
  }
  return draws;
}

namespace {

DelayModel scenario_delays(const ScenarioConfig& scenario) {
  return scenario.zero_delay ? DelayModel::zero() : DelayModel();
}

ArmCampaignResult result_of(const BidState& s, const ScenarioConfig& scenario) {
  ArmCampaignResult r;
  r.spent = s.spent;
  r.conversions = s.true_conversions;
  r.cost_rate = s.spent / std::max<double>(static_cast<double>(s.true_conversions), 1.0) / scenario.target_cpa;
  r.final_coefficient = s.coefficient;
  return r;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  return v[k];
}

void summarize(ArmSummary& arm, const ScenarioConfig& scenario) {
  std::vector<double> rates;
  std::size_t hits = 0;
  for (const auto& c : arm.campaigns) {
    rates.push_back(c.cost_rate);
    arm.total_spend += c.spent;
    arm.total_conversions += c.conversions;
    hits += scenario.cr_lo <= c.cost_rate && c.cost_rate <= scenario.cr_hi;
  }
  arm.cr = static_cast<double>(hits) / static_cast<double>(arm.campaigns.size());
  double sum = 0.0;
  for (double r : rates) sum += r;
  arm.cost_rate_mean = sum / static_cast<double>(rates.size());
  std::sort(rates.begin(), rates.end());
  arm.cost_rate_p10 = quantile_sorted(rates, 0.1);
  arm.cost_rate_p50 = quantile_sorted(rates, 0.5);
  arm.cost_rate_p90 = quantile_sorted(rates, 0.9);
}

std::string policy_name(const SignalPolicy& p) { return to_string(p.mode); }

}  // namespace

BidState simulate_campaign(const BidCampaign& campaign, int index, const SignalPolicy& policy,
                           const ScenarioConfig& scenario, const DelayModel& delays) {
  scenario.validate();
  BidState state(campaign);
  for (int k = 0; k < scenario.intervals() && !state.complete; ++k) {
    step(state, policy, market_draws(scenario, index, k), scenario, delays);
  }
  return state;
}

AbReport run_ab(const ScenarioConfig& scenario, const SignalPolicy& control, const SignalPolicy& experiment) {
  scenario.validate();
  const DelayModel delays = scenario_delays(scenario);
  const auto campaigns = draw_bid_campaigns(scenario);
  AbReport report;
  report.control.policy = policy_name(control);
  report.experiment.policy = policy_name(experiment);
  for (std::size_t c = 0; c < campaigns.size(); ++c) {
    BidState a(campaigns[c]);
    BidState b(campaigns[c]);
    for (int k = 0; k < scenario.intervals(); ++k) {
      if (a.complete && b.complete) break;
      const auto draws = market_draws(scenario, static_cast<int>(c), k);
      step(a, control, draws, scenario, delays);
      step(b, experiment, draws, scenario, delays);
    }
    report.control.campaigns.push_back(result_of(a, scenario));
    report.experiment.campaigns.push_back(result_of(b, scenario));
  }
  summarize(report.control, scenario);
  summarize(report.experiment, scenario);
  return report;
}

namespace {

std::string relative_delta(double control, double experiment) {
  if (control == 0.0) return "n/a";
  return fmt::format("{:+.2f}%", 100.0 * (experiment - control) / control);
}

}  // namespace

std::string format_ab_report(const AbReport& r) {
  const ArmSummary& a = r.control;
  const ArmSummary& b = r.experiment;
  std::string s = fmt::format("campaigns: {}\ncontrol policy: {}\nexperiment policy: {}\n\n", a.campaigns.size(),
                              a.policy, b.policy);
  s += fmt::format("{:<22} {:>14} {:>14} {:>10}\n", "metric", "control", "experiment", "delta");
  s += fmt::format("{:<22} {:>14.4f} {:>14.4f} {:>10}\n", "CR (cost rate band)", a.cr, b.cr,
                   fmt::format("{:+.2f}pp", 100.0 * (b.cr - a.cr)));
  s += fmt::format("{:<22} {:>14.2f} {:>14.2f} {:>10}\n", "total spend", a.total_spend, b.total_spend,
                   relative_delta(a.total_spend, b.total_spend));
  s += fmt::format("{:<22} {:>14} {:>14} {:>10}\n", "total conversions", a.total_conversions, b.total_conversions,
                   relative_delta(static_cast<double>(a.total_conversions), static_cast<double>(b.total_conversions)));
  s += fmt::format("{:<22} {:>14.4f} {:>14.4f}\n", "cost rate mean", a.cost_rate_mean, b.cost_rate_mean);
  s += fmt::format("{:<22} {:>14.4f} {:>14.4f}\n", "cost rate p10", a.cost_rate_p10, b.cost_rate_p10);
  s += fmt::format("{:<22} {:>14.4f} {:>14.4f}\n", "cost rate p50", a.cost_rate_p50, b.cost_rate_p50);
  s += fmt::format("{:<22} {:>14.4f} {:>14.4f}\n", "cost rate p90", a.cost_rate_p90, b.cost_rate_p90);
  return s;
}

void write_ab_report(const AbReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + (dir / file).string() + " for writing");
    return out;
  };
  open("summary.txt") << format_ab_report(r);
  {
    auto out = open("arms.csv");
    out << "arm,policy,campaigns,cr,total_spend,total_conversions,cost_rate_mean,cost_rate_p10,cost_rate_p50,"
           "cost_rate_p90\n";
    for (const auto* arm : {&r.control, &r.experiment}) {
      out << fmt::format("{},{},{},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                         arm == &r.control ? "control" : "experiment", arm->policy, arm->campaigns.size(), arm->cr,
                         arm->total_spend, arm->total_conversions, arm->cost_rate_mean, arm->cost_rate_p10,
                         arm->cost_rate_p50, arm->cost_rate_p90);
    }
  }
  auto out = open("campaigns.csv");
  out << "campaign,arm,cost_rate,spent,conversions,final_coefficient\n";
  for (const auto* arm : {&r.control, &r.experiment}) {
    for (std::size_t i = 0; i < arm->campaigns.size(); ++i) {
      const auto& c = arm->campaigns[i];
      out << fmt::format("{},{},{:.17g},{:.17g},{},{:.17g}\n", i, arm == &r.control ? "control" : "experiment",
                         c.cost_rate, c.spent, c.conversions, c.final_coefficient);
    }
  }
}

}  // namespace ldacp
