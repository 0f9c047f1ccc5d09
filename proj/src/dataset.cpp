#include "ldacp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace ldacp {

void validate_sample(const CampaignSample& s) {
  auto fail = [&](const char* what) {
    throw std::invalid_argument(fmt::format("campaign {}: {}", s.campaign_id, what));
  };
  if (s.label < 0) fail("label must be >= 0");
  if (s.impressions < 0 || s.clicks < 0 || s.views < 0 || s.tracked_conversions < 0) {
    fail("counts must be >= 0");
  }
  if (s.tracked_conversions > s.label) fail("tracked_conversions exceeds label");
  if (s.clicks > s.impressions) fail("clicks exceed impressions");
  if (!(s.z >= 0.0) || !std::isfinite(s.z)) fail("z must be finite and >= 0");
  if (s.impressions > 0 && !(s.z > 0.0)) fail("z must be > 0 when impressions > 0");
  if (s.tk < s.t0) fail("window end precedes window start");
}

double log_transform(double v) {
  if (v < 0.0) throw std::invalid_argument(fmt::format("log_transform: negative input {}", v));
  return std::log10(1.0 + v);
}

DenseFeatures dense_features(const CampaignSample& s) {
  return {log_transform(static_cast<double>(s.impressions)),
          log_transform(static_cast<double>(s.clicks)),
          log_transform(static_cast<double>(s.views)),
          log_transform(static_cast<double>(s.tracked_conversions)),
          log_transform(s.z),
          log_transform(s.window_minutes()),
          s.pcoc_prior_industry,
          s.pcoc_prior_product,
          s.pcoc_prior_account,
          s.churn_industry,
          s.churn_product,
          s.churn_account};
}

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> columns = {
      "campaign_id",        "industry",           "product_id",          "objective_id",
      "campaign_type",      "impressions",        "clicks",              "views",
      "tracked_conversions", "z",                  "pcoc_prior_industry", "pcoc_prior_product",
      "pcoc_prior_account", "churn_industry",     "churn_product",       "churn_account",
      "t0",                 "tk",                 "day",                 "label"};
  return columns;
}

void write_dataset(const Dataset& data, std::ostream& out) {
  const auto& cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& s : data) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                       "{:.17g},{:.17g},{},{}\n",
                       s.campaign_id, name(s.industry), s.product_id, s.objective_id, name(s.campaign_type),
                       s.impressions, s.clicks, s.views, s.tracked_conversions, s.z, s.pcoc_prior_industry,
                       s.pcoc_prior_product, s.pcoc_prior_account, s.churn_industry, s.churn_product,
                       s.churn_account, s.t0, s.tk, s.day, s.label);
  }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(data, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, std::string_view column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error(fmt::format("line {}: column '{}': cannot parse '{}'", line, column, text));
  }
  return value;
}

}  // namespace

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("line 1: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto& expected = dataset_columns();
  const auto header = split_fields(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string col(header[i]);
    if (!position.emplace(col, i).second) {
      throw std::runtime_error(fmt::format("line 1: duplicate column '{}'", col));
    }
  }
  for (const auto& col : expected) {
    if (!position.count(col)) throw std::runtime_error(fmt::format("line 1: missing column '{}'", col));
  }
  for (const auto col : header) {
    if (std::find(expected.begin(), expected.end(), col) == expected.end()) {
      throw std::runtime_error(fmt::format("line 1: unknown column '{}'", col));
    }
  }
  std::vector<std::size_t> idx;
  for (const auto& col : expected) idx.push_back(position.at(col));

  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw std::runtime_error(
          fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), f.size()));
    }
    auto field = [&](std::size_t k) { return f[idx[k]]; };
    auto i64 = [&](std::size_t k) { return parse_number<std::int64_t>(field(k), line_no, expected[k]); };
    auto i32 = [&](std::size_t k) { return parse_number<std::int32_t>(field(k), line_no, expected[k]); };
    auto real = [&](std::size_t k) { return parse_number<double>(field(k), line_no, expected[k]); };

    CampaignSample s;
    try {
      s.campaign_id = i64(0);
      s.industry = industry_from_string(field(1));
      s.product_id = i32(2);
      s.objective_id = i32(3);
      s.campaign_type = campaign_type_from_string(field(4));
      s.impressions = i64(5);
      s.clicks = i64(6);
      s.views = i64(7);
      s.tracked_conversions = i64(8);
      s.z = real(9);
      s.pcoc_prior_industry = real(10);
      s.pcoc_prior_product = real(11);
      s.pcoc_prior_account = real(12);
      s.churn_industry = real(13);
      s.churn_product = real(14);
      s.churn_account = real(15);
      s.t0 = real(16);
      s.tk = real(17);
      s.day = i32(18);
      s.label = i64(19);
      validate_sample(s);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("line {}: {}", line_no, e.what()));
    }
    data.push_back(s);
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return read_dataset(in);
}

DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed) {
  DatasetSplit split;
  Dataset first_week;
  for (const auto& s : data) {
    if (s.day < 1 || s.day > 8) {
      throw std::invalid_argument(fmt::format("campaign {}: day tag {} outside 1..8", s.campaign_id, s.day));
    }
    (s.day == 8 ? split.test : first_week).push_back(s);
  }
  std::vector<std::size_t> order(first_week.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = first_week.size() / 10;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < order.size() - n_val ? split.train : split.validation).push_back(first_week[order[k]]);
  }
  if (split.train.empty()) throw std::invalid_argument("split_dataset: no samples on days 1-7 for training");
  if (split.validation.empty()) throw std::invalid_argument("split_dataset: validation split is empty");
  return split;
}

std::vector<std::int64_t> labels_of(std::span<const CampaignSample> data) {
  std::vector<std::int64_t> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.label);
  return out;
}

}  // namespace ldacp
