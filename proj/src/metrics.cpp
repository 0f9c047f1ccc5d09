#include "ldacp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace ldacp {

namespace {

void check_sizes(std::size_t predictions, std::size_t labels, const char* where) {
  if (predictions != labels) {
    throw std::invalid_argument(fmt::format("{}: {} predictions for {} labels", where, predictions, labels));
  }
}

bool compliant(double prediction, std::int64_t label, double lo, double hi, double zero_threshold) {
  if (label == 0) return prediction <= zero_threshold;
  const double ratio = prediction / static_cast<double>(label);
  return lo <= ratio && ratio <= hi;
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

MapeResult mape(std::span<const double> predictions, std::span<const std::int64_t> labels) {
  check_sizes(predictions.size(), labels.size(), "mape");
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] <= 0) {
      ++r.excluded_zero;
      continue;
    }
    const double y = static_cast<double>(labels[i]);
    sum += std::abs(predictions[i] - y) / y;
    ++r.used;
  }
  if (r.used == 0) throw std::invalid_argument("mape: no sample has a positive label");
  r.mape = sum / static_cast<double>(r.used);
  return r;
}

double compliance_rate(std::span<const double> predictions, std::span<const std::int64_t> labels, double lo,
                       double hi, double zero_label_threshold) {
  check_sizes(predictions.size(), labels.size(), "compliance_rate");
  if (labels.empty()) throw std::invalid_argument("compliance_rate: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += compliant(predictions[i], labels[i], lo, hi, zero_label_threshold);
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> default_taus() {
  std::vector<double> taus;
  for (int k = 1; k <= 10; ++k) taus.push_back(k / 20.0);
  return taus;
}

std::vector<TauPoint> cr_tau_curve(std::span<const double> predictions, std::span<const std::int64_t> labels,
                                   std::span<const double> taus, double zero_label_threshold) {
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] <= 1.0)) throw std::invalid_argument("cr_tau_curve: tau outside (0, 1]");
    if (i > 0 && taus[i] <= taus[i - 1]) throw std::invalid_argument("cr_tau_curve: taus must ascend");
  }
  std::vector<TauPoint> curve;
  for (double tau : taus) {
    curve.push_back({tau, compliance_rate(predictions, labels, 1.0 - tau, 1.0 + tau, zero_label_threshold)});
  }
  return curve;
}

std::vector<std::int64_t> default_bucket_edges() {
  return {0, 1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000};
}

std::vector<BucketRow> per_bucket_report(std::span<const FusionOutput> predictions,
                                         std::span<const std::int64_t> labels,
                                         std::span<const std::int64_t> edges, double zero_label_threshold) {
  check_sizes(predictions.size(), labels.size(), "per_bucket_report");
  if (edges.empty()) throw std::invalid_argument("per_bucket_report: no bucket edges");
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("per_bucket_report: edges must be strictly ascending");
  }
  std::vector<BucketRow> rows;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    BucketRow row;
    row.lo = edges[b];
    if (b + 1 < edges.size()) row.hi = edges[b + 1];
    std::vector<double> f, g, hat;
    std::vector<std::int64_t> y;
    double lambda_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < row.lo || (row.hi && labels[i] >= *row.hi)) continue;
      f.push_back(clamp_prediction(predictions[i].y_f, 0));
      g.push_back(clamp_prediction(predictions[i].y_g, 0));
      hat.push_back(predictions[i].y_final);
      y.push_back(labels[i]);
      lambda_sum += predictions[i].lambda;
    }
    row.count = y.size();
    if (!y.empty()) {
      row.cr_f = compliance_rate(f, y, 1.0 - kCanonicalTau, 1.0 + kCanonicalTau, zero_label_threshold);
      row.cr_g = compliance_rate(g, y, 1.0 - kCanonicalTau, 1.0 + kCanonicalTau, zero_label_threshold);
      row.cr_hat = compliance_rate(hat, y, 1.0 - kCanonicalTau, 1.0 + kCanonicalTau, zero_label_threshold);
      row.mean_lambda = lambda_sum / static_cast<double>(y.size());
    }
    rows.push_back(row);
  }
  return rows;
}

TercileLambda mean_lambda_by_tercile(std::span<const FusionOutput> predictions,
                                     std::span<const std::int64_t> labels) {
  check_sizes(predictions.size(), labels.size(), "mean_lambda_by_tercile");
  if (labels.size() < 3) throw std::invalid_argument("mean_lambda_by_tercile: need at least 3 samples");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  const std::size_t third = labels.size() / 3;
  TercileLambda t;
  for (std::size_t k = 0; k < third; ++k) {
    t.lowest += predictions[order[k]].lambda;
    t.highest += predictions[order[order.size() - 1 - k]].lambda;
  }
  t.lowest /= static_cast<double>(third);
  t.highest /= static_cast<double>(third);
  return t;
}

MetricsReport build_report(const std::string& model, std::span<const CampaignSample> samples,
                           std::span<const FusionOutput> predictions, double zero_label_threshold) {
  check_sizes(predictions.size(), samples.size(), "build_report");
  MetricsReport r;
  r.model = model;
  r.samples = samples.size();
  std::vector<double> y_final;
  y_final.reserve(predictions.size());
  for (const auto& p : predictions) y_final.push_back(p.y_final);
  const auto labels = labels_of(samples);
  r.mape = mape(y_final, labels);
  r.cr = compliance_rate(y_final, labels, 1.0 - kCanonicalTau, 1.0 + kCanonicalTau, zero_label_threshold);
  const auto taus = default_taus();
  r.cr_tau = cr_tau_curve(y_final, labels, taus, zero_label_threshold);

  for (Industry ind : kAllIndustries) {
    IndustryRow row;
    row.industry = ind;
    std::vector<double> p;
    std::vector<std::int64_t> y;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].industry != ind) continue;
      p.push_back(y_final[i]);
      y.push_back(labels[i]);
    }
    row.count = y.size();
    if (!y.empty()) {
      row.cr = compliance_rate(p, y, 1.0 - kCanonicalTau, 1.0 + kCanonicalTau, zero_label_threshold);
      if (std::any_of(y.begin(), y.end(), [](std::int64_t v) { return v > 0; })) row.mape = mape(p, y).mape;
    }
    r.per_industry.push_back(row);
  }
  const auto edges = default_bucket_edges();
  r.per_bucket = per_bucket_report(predictions, labels, edges, zero_label_threshold);
  return r;
}

std::string format_summary(const MetricsReport& r) {
  std::string s = fmt::format("model: {}\nsamples: {}\nMAPE: {:.4f} (over {} samples with y > 0; {} zero-label "
                              "samples excluded)\nCR: {:.4f}\n",
                              r.model, r.samples, r.mape.mape, r.mape.used, r.mape.excluded_zero, r.cr);
  s += "\nCR_tau\n";
  for (const auto& t : r.cr_tau) s += fmt::format("  tau {:.2f}  {:.4f}\n", t.tau, t.cr);
  s += "\nper industry\n";
  for (const auto& row : r.per_industry) {
    s += fmt::format("  {:<14} n={:<7} MAPE={:<8} CR={}\n", name(row.industry), row.count,
                     row.mape ? fmt::format("{:.4f}", *row.mape) : "-",
                     row.cr ? fmt::format("{:.4f}", *row.cr) : "-");
  }
  s += "\nper label bucket (CR of y_f / y_g / y_hat, mean lambda)\n";
  for (const auto& row : r.per_bucket) {
    const std::string range =
        row.hi ? fmt::format("[{}, {})", row.lo, *row.hi) : fmt::format("[{}, inf)", row.lo);
    auto f = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("-"); };
    s += fmt::format("  {:<14} n={:<7} {} / {} / {}  lambda={}\n", range, row.count, f(row.cr_f), f(row.cr_g),
                     f(row.cr_hat), f(row.mean_lambda));
  }
  return s;
}

namespace {

void write_metrics_rows(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "model,samples,mape,mape_samples,zero_label_samples,cr\n";
  for (const auto& r : reports) {
    out << fmt::format("{},{},{:.17g},{},{},{:.17g}\n", r.model, r.samples, r.mape.mape, r.mape.used,
                       r.mape.excluded_zero, r.cr);
  }
}

}  // namespace

void write_report(const MetricsReport& r, const std::filesystem::path& dir, std::span<const CampaignSample> samples,
                  std::span<const FusionOutput> predictions) {
  std::filesystem::create_directories(dir);
  open_out(dir / "summary.txt") << format_summary(r);
  {
    auto out = open_out(dir / "metrics.csv");
    write_metrics_rows(out, std::span<const MetricsReport>(&r, 1));
  }
  {
    auto out = open_out(dir / "cr_tau.csv");
    out << "tau,cr\n";
    for (const auto& t : r.cr_tau) out << fmt::format("{:.17g},{:.17g}\n", t.tau, t.cr);
  }
  {
    auto out = open_out(dir / "per_industry.csv");
    out << "industry,count,mape,cr\n";
    for (const auto& row : r.per_industry) {
      out << fmt::format("{},{},{},{}\n", name(row.industry), row.count, opt(row.mape), opt(row.cr));
    }
  }
  {
    auto out = open_out(dir / "per_bucket.csv");
    out << "lo,hi,count,cr_f,cr_g,cr_hat,mean_lambda\n";
    for (const auto& row : r.per_bucket) {
      out << fmt::format("{},{},{},{},{},{},{}\n", row.lo, row.hi ? std::to_string(*row.hi) : std::string(),
                         row.count, opt(row.cr_f), opt(row.cr_g), opt(row.cr_hat), opt(row.mean_lambda));
    }
  }
  if (!predictions.empty()) {
    check_sizes(predictions.size(), samples.size(), "write_report");
    auto out = open_out(dir / "predictions.csv");
    out << "campaign_id,label,tracked_conversions,lambda,y_f,y_g,y_hat,y_final\n";
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const auto& p = predictions[i];
      out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", samples[i].campaign_id,
                         samples[i].label, samples[i].tracked_conversions, p.lambda, p.y_f, p.y_g, p.y_hat,
                         p.y_final);
    }
  }
}

void write_comparison(std::span<const MetricsReport> reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto out = open_out(dir / "comparison.csv");
  write_metrics_rows(out, reports);
  std::string text;
  text += fmt::format("{:<22} {:>10} {:>10}\n", "model", "MAPE", "CR");
  for (const auto& r : reports) text += fmt::format("{:<22} {:>10.4f} {:>10.4f}\n", r.model, r.mape.mape, r.cr);
  open_out(dir / "comparison.txt") << text;
}

}  // namespace ldacp
