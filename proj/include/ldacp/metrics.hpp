#pragma once

// MAPE, compliance rate, CR_tau and the segment reports built from them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldacp/campaign.hpp"
#include "ldacp/dataset.hpp"
#include "ldacp/moe.hpp"

namespace ldacp {

struct MapeResult {
  double mape = 0.0;
  std::size_t used = 0;
  std::size_t excluded_zero = 0;
};

// Mean of |y_hat - y| / y over y > 0. Throws when no label is positive.
MapeResult mape(std::span<const double> predictions, std::span<const std::int64_t> labels);

inline constexpr double kCanonicalTau = 0.2;

// A zero-label sample is compliant iff its prediction is at most this.
inline constexpr double kDefaultZeroLabelThreshold = 0.5;

// Fraction of samples with lo <= y_hat / y <= hi. Throws on empty input.
double compliance_rate(std::span<const double> predictions, std::span<const std::int64_t> labels,
                       double lo = 1.0 - kCanonicalTau, double hi = 1.0 + kCanonicalTau,
                       double zero_label_threshold = kDefaultZeroLabelThreshold);

struct TauPoint {
  double tau = 0.0;
  double cr = 0.0;
};

// 0.05, 0.10, ..., 0.50.
std::vector<double> default_taus();

// Taus must be ascending within (0, 1].
std::vector<TauPoint> cr_tau_curve(std::span<const double> predictions, std::span<const std::int64_t> labels,
                                   std::span<const double> taus,
                                   double zero_label_threshold = kDefaultZeroLabelThreshold);

struct IndustryRow {
  Industry industry = Industry::kGames;
  std::size_t count = 0;
  std::optional<double> mape;
  std::optional<double> cr;
};

struct BucketRow {
  std::int64_t lo = 0;
  std::optional<std::int64_t> hi;  // unbounded when empty
  std::size_t count = 0;
  std::optional<double> cr_f;
  std::optional<double> cr_g;
  std::optional<double> cr_hat;
  std::optional<double> mean_lambda;
};

// Label bucket boundaries used for the per-bucket table.
std::vector<std::int64_t> default_bucket_edges();

// Buckets are [edges[i], edges[i+1]) plus a final open bucket [edges.back(), inf).
// Empty buckets yield rows without metrics.
std::vector<BucketRow> per_bucket_report(std::span<const FusionOutput> predictions,
                                         std::span<const std::int64_t> labels,
                                         std::span<const std::int64_t> edges,
                                         double zero_label_threshold = kDefaultZeroLabelThreshold);

struct TercileLambda {
  double lowest = 0.0;
  double highest = 0.0;
};

// Mean gate weight over the lowest and highest thirds of samples ranked by label.
TercileLambda mean_lambda_by_tercile(std::span<const FusionOutput> predictions,
                                     std::span<const std::int64_t> labels);

struct MetricsReport {
  std::string model;
  std::size_t samples = 0;
  MapeResult mape;
  double cr = 0.0;
  std::vector<TauPoint> cr_tau;
  std::vector<IndustryRow> per_industry;
  std::vector<BucketRow> per_bucket;
};

// Metrics are computed on the clamped predictions (y_final).
MetricsReport build_report(const std::string& model, std::span<const CampaignSample> samples,
                           std::span<const FusionOutput> predictions,
                           double zero_label_threshold = kDefaultZeroLabelThreshold);

std::string format_summary(const MetricsReport& report);

// Writes summary.txt, metrics.csv, cr_tau.csv, per_industry.csv and
// per_bucket.csv into dir, plus predictions.csv when predictions are given.
void write_report(const MetricsReport& report, const std::filesystem::path& dir,
                  std::span<const CampaignSample> samples = {}, std::span<const FusionOutput> predictions = {});

// Side-by-side table of several reports (metrics.csv layout, one row per model).
void write_comparison(std::span<const MetricsReport> reports, const std::filesystem::path& dir);

}  // namespace ldacp
