#include "ldacp/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "ldacp/vrmp.hpp"

namespace ldacp {

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("generator config: " + what); };
  if (n_samples < 0) fail("n_samples must be >= 0");
  if (!(scale_log_sigma >= 0.0)) fail("scale_log_sigma must be >= 0");
  if (!(tail_probability >= 0.0 && tail_probability <= 1.0)) fail("tail_probability must lie in [0, 1]");
  if (!(tail_exponent > 0.0)) fail("tail_exponent must be > 0");
  if (!(tail_scale > 0.0)) fail("tail_scale must be > 0");
  if (!(max_scale > 0.0)) fail("max_scale must be > 0");
  if (!(bias_sigma >= 0.0)) fail("bias_sigma must be >= 0");
  if (bias_share_industry < 0.0 || bias_share_product < 0.0 || bias_share_account < 0.0 ||
      bias_share_industry + bias_share_product + bias_share_account > 1.0 + 1e-12) {
    fail("bias shares must be non-negative and sum to at most 1");
  }
  if (!(prior_noise_sigma >= 0.0)) fail("prior_noise_sigma must be >= 0");
  if (!(z_expected_share >= 0.0 && z_expected_share <= 1.0)) fail("z_expected_share must lie in [0, 1]");
  if (!(z_noise_sigma >= 0.0)) fail("z_noise_sigma must be >= 0");
  if (!(delay_spread_sigma >= 0.0) || !(account_delay_sigma >= 0.0)) fail("delay sigmas must be >= 0");
  if (!(window_min_minutes > 0.0 && window_min_minutes <= window_max_minutes)) {
    fail("window bounds must satisfy 0 < min <= max");
  }
  if (!(label_horizon_minutes > 0.0)) fail("label_horizon_minutes must be > 0");
  if (n_products < 1 || n_objectives < 1 || n_accounts < 1) fail("vocabulary sizes must be >= 1");
  if (n_days != 8) fail("n_days must be 8 (seven training days plus one test day)");
  if (shard_size < 1) fail("shard_size must be >= 1");
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace

CalibrationStats calibration_stats(const Dataset& data) {
  CalibrationStats st;
  if (data.empty()) return st;
  std::vector<double> labels;
  std::vector<double> pcoc;
  double sum = 0.0;
  std::size_t zeros = 0;
  for (const auto& s : data) {
    labels.push_back(static_cast<double>(s.label));
    pcoc.push_back(static_cast<double>(pcoc_label(s.z, s.label)));
    sum += static_cast<double>(s.label);
    zeros += s.label == 0;
  }
  st.label_mean = sum / static_cast<double>(data.size());
  st.label_median = quantile(labels, 0.5);
  st.label_max = *std::max_element(labels.begin(), labels.end());
  st.zero_fraction = static_cast<double>(zeros) / static_cast<double>(data.size());
  st.pcoc_p50 = quantile(pcoc, 0.5);
  st.pcoc_p99 = quantile(pcoc, 0.99);
  return st;
}

void check_calibration_targets(const CalibrationStats& st) {
  if (st.label_mean < 15.0 || st.label_mean > 40.0) {
    throw std::runtime_error(fmt::format("calibration: label mean {:.3f} outside [15, 40]", st.label_mean));
  }
  if (!(st.zero_fraction > 0.01 && st.zero_fraction < 0.5)) {
    throw std::runtime_error(fmt::format("calibration: zero-label fraction {:.4f} outside (0.01, 0.5)", st.zero_fraction));
  }
  if (st.label_max < 1000.0 * st.label_median) {
    throw std::runtime_error(fmt::format("calibration: max label {} below 1000 x median {}", st.label_max,
                                         st.label_median));
  }
  if (!(st.pcoc_p99 < 5.0 * st.pcoc_p50)) {
    throw std::runtime_error(
        fmt::format("calibration: PCOC p99/p50 = {:.3f} not below 5", st.pcoc_p99 / st.pcoc_p50));
  }
}

CampaignWorld::CampaignWorld(const GeneratorConfig& config) : config_(config) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    0x57u, 0x0eu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s_ind = config.bias_sigma * std::sqrt(config.bias_share_industry);
  const double s_prod = config.bias_sigma * std::sqrt(config.bias_share_product);
  const double s_acct = config.bias_sigma * std::sqrt(config.bias_share_account);

  industries_.resize(kNumIndustries);
  for (auto& e : industries_) {
    e.log_bias = s_ind * normal(rng);
    e.churn = 0.05 + 0.25 * unit(rng);
  }
  products_.resize(static_cast<std::size_t>(config.n_products) + 1);
  for (auto& e : products_) {
    e.industry = static_cast<int>(unit(rng) * kNumIndustries) % kNumIndustries;
    e.log_bias = s_prod * normal(rng);
    e.churn = 0.5 * unit(rng);
  }
  accounts_.resize(static_cast<std::size_t>(config.n_accounts));
  for (auto& e : accounts_) {
    e.log_bias = s_acct * normal(rng);
    e.log_delay = config.account_delay_sigma * normal(rng);
    const double logit = -1.2 + 1.5 * e.log_delay + 0.3 * normal(rng);
    e.churn = 1.0 / (1.0 + std::exp(-logit));
  }
}

CampaignProfile CampaignWorld::draw_profile(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> product_pick(1, config_.n_products);
  std::uniform_int_distribution<int> account_pick(0, config_.n_accounts - 1);
  std::uniform_int_distribution<int> objective_pick(0, config_.n_objectives - 1);
  std::discrete_distribution<int> type_pick({0.35, 0.15, 0.30, 0.20});

  CampaignProfile p;
  p.product_id = product_pick(rng);
  const Entity& product = products_[static_cast<std::size_t>(p.product_id)];
  const Entity& industry = industries_[static_cast<std::size_t>(product.industry)];
  const Entity& account = accounts_[static_cast<std::size_t>(account_pick(rng))];
  p.industry = kAllIndustries[static_cast<std::size_t>(product.industry)];
  p.objective_id = objective_pick(rng);
  p.campaign_type = kAllCampaignTypes[static_cast<std::size_t>(type_pick(rng))];

  const double residual_share = std::max(
      0.0, 1.0 - config_.bias_share_industry - config_.bias_share_product - config_.bias_share_account);
  const double residual = config_.bias_sigma * std::sqrt(residual_share) * normal(rng);
  p.bias = std::exp(industry.log_bias + product.log_bias + account.log_bias + residual);
  const double noise = config_.prior_noise_sigma;
  p.pcoc_prior_industry = std::exp(industry.log_bias + noise * normal(rng));
  p.pcoc_prior_product = std::exp(product.log_bias + noise * normal(rng));
  p.pcoc_prior_account = std::exp(account.log_bias + noise * normal(rng));
  p.churn_industry = industry.churn;
  p.churn_product = product.churn;
  p.churn_account = account.churn;
  p.delay_multiplier = std::exp(account.log_delay + config_.delay_spread_sigma * normal(rng));
  const double objective_effect = 0.1 * (p.objective_id - 0.5 * (config_.n_objectives - 1));
  p.conversion_per_click = std::min(0.9, std::exp(std::log(0.05) + objective_effect + 0.5 * normal(rng)));
  p.click_through_rate = std::min(0.5, std::exp(std::log(0.02) + 0.4 * normal(rng)));
  p.view_rate = 0.3 + 0.6 * unit(rng);
  return p;
}

std::int64_t tracked_within(std::span<const double> impression_fraction, std::span<const double> delay,
                            double window, double horizon) {
  std::int64_t tracked = 0;
  for (std::size_t i = 0; i < delay.size(); ++i) {
    if (delay[i] <= horizon && impression_fraction[i] * window + delay[i] <= window) ++tracked;
  }
  return tracked;
}

namespace {

void generate_shard(const GeneratorConfig& cfg, const CampaignWorld& world, const DelayModel& delays,
                    std::int64_t shard, std::int64_t begin, std::int64_t end, Dataset& out) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(shard), 0x5au};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> day_pick(1, cfg.n_days);

  std::vector<double> fractions;
  std::vector<double> lags;
  for (std::int64_t id = begin; id < end; ++id) {
    const CampaignProfile p = world.draw_profile(rng);

    double scale = 0.0;
    if (unit(rng) < cfg.tail_probability) {
      scale = cfg.tail_scale * std::pow(1.0 - unit(rng), -1.0 / cfg.tail_exponent);
    } else {
      scale = std::exp(cfg.scale_log_mean + cfg.scale_log_sigma * normal(rng));
    }
    scale = std::min(scale, cfg.max_scale);

    CampaignSample s;
    s.campaign_id = id;
    s.industry = p.industry;
    s.product_id = p.product_id;
    s.objective_id = p.objective_id;
    s.campaign_type = p.campaign_type;
    s.pcoc_prior_industry = p.pcoc_prior_industry;
    s.pcoc_prior_product = p.pcoc_prior_product;
    s.pcoc_prior_account = p.pcoc_prior_account;
    s.churn_industry = p.churn_industry;
    s.churn_product = p.churn_product;
    s.churn_account = p.churn_account;
    s.day = day_pick(rng);
    s.t0 = 1440.0 * (s.day - 1) + 1440.0 * unit(rng);
    const double window = std::exp(std::log(cfg.window_min_minutes) +
                                   unit(rng) * std::log(cfg.window_max_minutes / cfg.window_min_minutes));
    s.tk = s.t0 + window;

    std::poisson_distribution<std::int64_t> conversions_dist(scale);
    const std::int64_t conversions = conversions_dist(rng);
    fractions.resize(static_cast<std::size_t>(conversions));
    lags.resize(static_cast<std::size_t>(conversions));
    std::int64_t label = 0;
    for (std::int64_t c = 0; c < conversions; ++c) {
      fractions[static_cast<std::size_t>(c)] = unit(rng);
      lags[static_cast<std::size_t>(c)] = p.delay_multiplier * delays.sample(p.campaign_type, unit(rng));
      label += lags[static_cast<std::size_t>(c)] <= cfg.label_horizon_minutes;
    }
    s.label = label;
    s.tracked_conversions = tracked_within(fractions, lags, window, cfg.label_horizon_minutes);

    const double expected_label =
        scale * delays.cdf(p.campaign_type, cfg.label_horizon_minutes / p.delay_multiplier);
    const double blended =
        (1.0 - cfg.z_expected_share) * static_cast<double>(label) + cfg.z_expected_share * expected_label;
    s.z = std::max(1e-3, p.bias * blended * std::exp(cfg.z_noise_sigma * normal(rng)));

    std::poisson_distribution<std::int64_t> clicks_dist((static_cast<double>(conversions) + 0.5) /
                                                        p.conversion_per_click);
    s.clicks = clicks_dist(rng);
    std::poisson_distribution<std::int64_t> extra_dist(
        (static_cast<double>(s.clicks) + 1.0) * (1.0 / p.click_through_rate - 1.0));
    s.impressions = std::max<std::int64_t>(1, s.clicks + extra_dist(rng));
    std::binomial_distribution<std::int64_t> views_dist(s.impressions, p.view_rate);
    s.views = views_dist(rng);
    out.push_back(s);
  }
}

}  // namespace

Dataset generate_campaigns(const GeneratorConfig& config, const DelayModel& delays) {
  config.validate();
  const CampaignWorld world(config);
  Dataset data;
  data.reserve(static_cast<std::size_t>(config.n_samples));
  for (std::int64_t shard = 0, begin = 0; begin < config.n_samples; ++shard, begin += config.shard_size) {
    generate_shard(config, world, delays, shard, begin, std::min(config.n_samples, begin + config.shard_size),
                   data);
  }
  if (config.check_calibration && config.n_samples >= config.calibration_min_samples) {
    check_calibration_targets(calibration_stats(data));
  }
  return data;
}

}  // namespace ldacp
