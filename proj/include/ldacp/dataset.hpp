#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ldacp/campaign.hpp"

namespace ldacp {

struct CampaignSample {
  std::int64_t campaign_id = 0;
  // sparse
  Industry industry = Industry::kGames;
  std::int32_t product_id = 1;    // 1-based; 0 is "unknown"
  std::int32_t objective_id = 0;  // 0-based
  CampaignType campaign_type = CampaignType::kApp;
  // dense
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t views = 0;
  std::int64_t tracked_conversions = 0;
  double z = 0.0;  // aggregated pCTCVR over the window's impressions
  double pcoc_prior_industry = 1.0;
  double pcoc_prior_product = 1.0;
  double pcoc_prior_account = 1.0;
  double churn_industry = 0.0;
  double churn_product = 0.0;
  double churn_account = 0.0;
  // window [t0, tk], minutes
  double t0 = 0.0;
  double tk = 0.0;
  int day = 1;
  std::int64_t label = 0;  // conversions within three days of impression

  double window_minutes() const { return tk - t0; }

  bool operator==(const CampaignSample&) const = default;
};

using Dataset = std::vector<CampaignSample>;

// Throws std::invalid_argument naming the violated invariant.
void validate_sample(const CampaignSample& s);

// log10(1 + v); throws on negative input.
double log_transform(double v);

inline constexpr int kDenseFeatureCount = 12;
using DenseFeatures = std::array<double, kDenseFeatureCount>;

// Counts and aggregates (impressions, clicks, views, tracked, z, window) are
// log-transformed; PCOC priors and churn rates pass through.
DenseFeatures dense_features(const CampaignSample& s);

// Column names in file order.
const std::vector<std::string>& dataset_columns();

void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::filesystem::path& path);

// Columns may appear in any order but must all be present; errors carry the
// 1-based line number.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Days 1-7 are shuffled and split 9:1 into train / validation; day 8 is test.
DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed);

std::vector<std::int64_t> labels_of(std::span<const CampaignSample> data);

}  // namespace ldacp
