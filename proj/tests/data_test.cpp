#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ldacp/dataset.hpp"
#include "ldacp/delay.hpp"
#include "ldacp/generator.hpp"
#include "ldacp/vrmp.hpp"

using namespace ldacp;

namespace {

GeneratorConfig small_config(std::int64_t n, std::uint64_t seed = 42) {
  GeneratorConfig c;
  c.n_samples = n;
  c.seed = seed;
  return c;
}

std::string to_csv(const Dataset& d) {
  std::ostringstream out;
  write_dataset(d, out);
  return out.str();
}

// Nearest-rank quantile on a sorted copy.
double nearest_rank(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(k, v.size() - 1)];
}

}  // namespace

TEST_CASE("log transform") {
  CHECK(log_transform(0.0) == 0.0);
  CHECK(log_transform(999.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(log_transform(9.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(log_transform(-1.0), std::invalid_argument);
}

TEST_CASE("delay sampler at table points") {
  const DelayModel m;
  CHECK(m.sample(CampaignType::kApp, 0.5) == doctest::Approx(46.0).epsilon(1e-12));
  CHECK(m.sample(CampaignType::kSitePage, 0.9) == doctest::Approx(74.0).epsilon(1e-12));
  CHECK(m.sample(CampaignType::kApp, 0.45) == doctest::Approx(36.5).epsilon(1e-12));
  CHECK(sample_delay(CampaignType::kLiveStream, 0.1) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(sample_delay(CampaignType::kAppAdvance, 0.8) == doctest::Approx(569.0).epsilon(1e-12));
  CHECK(m.sample(CampaignType::kApp, 0.0) == 0.0);
  CHECK(m.sample(CampaignType::kApp, 1.0) == doctest::Approx(5540.0));
  CHECK(DelayModel::zero().sample(CampaignType::kApp, 0.77) == 0.0);
}

TEST_CASE("delay cdf inverts the sampler") {
  const DelayModel m;
  for (CampaignType t : kAllCampaignTypes) {
    for (double u = 0.01; u < 1.0; u += 0.07) {
      CHECK(m.cdf(t, m.sample(t, u)) == doctest::Approx(u).epsilon(1e-9));
    }
  }
}

TEST_CASE("empirical APP deciles match the table") {
  const DelayModel m;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = m.sample(CampaignType::kApp, u(rng));
  const double table[] = {7, 11, 17, 27, 46, 103, 305, 999, 2770};
  for (int k = 1; k <= 9; ++k) {
    const double q = nearest_rank(draws, k / 10.0);
    CHECK(std::abs(q - table[k - 1]) / table[k - 1] < 0.05);
  }
}

TEST_CASE("name round trips") {
  for (Industry i : kAllIndustries) CHECK(industry_from_string(name(i)) == i);
  for (CampaignType t : kAllCampaignTypes) CHECK(campaign_type_from_string(name(t)) == t);
  CHECK_THROWS(industry_from_string("FARMING"));
}

TEST_CASE("tracked_within counts matured conversions") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> lag(1.0 / 300.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 40;
    std::vector<double> f(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = u(rng);
      d[i] = lag(rng);
    }
    const double window = 30.0 + 3000.0 * u(rng);
    const double horizon = 4320.0;
    std::int64_t expect = 0;
    for (std::size_t i = 0; i < n; ++i) expect += d[i] <= horizon && f[i] * window + d[i] <= window;
    CHECK(tracked_within(f, d, window, horizon) == expect);
  }
}

TEST_CASE("generator determinism and sample invariants") {
  const auto a = generate_campaigns(small_config(1000));
  const auto b = generate_campaigns(small_config(1000));
  CHECK(a == b);
  CHECK(to_csv(a) == to_csv(b));
  CHECK(a.size() == 1000);
  CHECK(a != generate_campaigns(small_config(1000, 43)));
  for (const auto& s : a) {
    CHECK_NOTHROW(validate_sample(s));
    CHECK(s.tracked_conversions <= s.label);
    CHECK(s.clicks <= s.impressions);
    CHECK(s.views <= s.impressions);
    CHECK(s.label >= 0);
    if (s.impressions > 0) CHECK(s.z > 0.0);
    CHECK(s.day >= 1);
    CHECK(s.day <= 8);
    CHECK(s.tk > s.t0);
  }
}

TEST_CASE("shard size does not change the prefix") {
  auto c = small_config(2500);
  c.shard_size = 1000;
  const auto full = generate_campaigns(c);
  c.n_samples = 1500;
  const auto part = generate_campaigns(c);
  CHECK(std::equal(part.begin(), part.end(), full.begin()));
}

TEST_CASE("shorter windows never track more conversions") {
  auto wide = small_config(3000, 5);
  auto narrow = wide;
  narrow.window_max_minutes = 600.0;
  const auto a = generate_campaigns(wide);
  const auto b = generate_campaigns(narrow);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(b[i].window_minutes() <= a[i].window_minutes());
    CHECK(b[i].tracked_conversions <= a[i].tracked_conversions);
  }
}

TEST_CASE("calibration targets at 1e5 samples") {
  const auto data = generate_campaigns(small_config(100000));
  std::vector<double> labels, pcoc;
  double sum = 0.0;
  std::size_t zeros = 0;
  for (const auto& s : data) {
    labels.push_back(static_cast<double>(s.label));
    pcoc.push_back(s.label > 0 ? s.z / static_cast<double>(s.label) : 1.0);
    sum += static_cast<double>(s.label);
    zeros += s.label == 0;
  }
  const double mean = sum / static_cast<double>(data.size());
  const double median = nearest_rank(labels, 0.5);
  const double max = *std::max_element(labels.begin(), labels.end());
  const double zero_share = static_cast<double>(zeros) / static_cast<double>(data.size());
  CHECK(mean >= 15.0);
  CHECK(mean <= 40.0);
  CHECK(zero_share > 0.01);
  CHECK(zero_share < 0.5);
  CHECK(max >= 1000.0 * median);
  CHECK(nearest_rank(pcoc, 0.99) / nearest_rank(pcoc, 0.5) < 5.0);

  const auto st = calibration_stats(data);
  CHECK(st.label_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(st.zero_fraction == zero_share);
  CHECK(st.label_max == max);
  CHECK_NOTHROW(check_calibration_targets(st));
}

TEST_CASE("calibration check names the violated target") {
  CalibrationStats st{5.0, 1.0, 5000.0, 0.2, 1.0, 2.0};
  try {
    check_calibration_targets(st);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("mean") != std::string::npos);
  }
}

TEST_CASE("generator config validation") {
  auto c = small_config(10);
  c.n_samples = -1;
  CHECK_THROWS(c.validate());
  c = small_config(10);
  c.n_days = 7;
  CHECK_THROWS(c.validate());
  c = small_config(10);
  c.tail_probability = 1.5;
  CHECK_THROWS(c.validate());
}

TEST_CASE("day split arithmetic") {
  Dataset d;
  for (int day = 1; day <= 8; ++day) {
    for (int k = 0; k < 1000; ++k) {
      CampaignSample s;
      s.campaign_id = static_cast<std::int64_t>(d.size());
      s.day = day;
      d.push_back(s);
    }
  }
  const auto split = split_dataset(d, 1);
  CHECK(split.train.size() == 6300);
  CHECK(split.validation.size() == 700);
  CHECK(split.test.size() == 1000);
  for (const auto& s : split.test) CHECK(s.day == 8);

  const auto again = split_dataset(d, 1);
  CHECK(again.train == split.train);
  CHECK(again.validation == split.validation);
  CHECK(split_dataset(d, 2).validation != split.validation);

  std::set<std::int64_t> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& s : *part) ids.insert(s.campaign_id);
  CHECK(ids.size() == d.size());

  Dataset last_day(10);
  for (auto& s : last_day) s.day = 8;
  CHECK_THROWS_AS(split_dataset(last_day, 1), std::invalid_argument);
}

TEST_CASE("dataset file round trip and schema errors") {
  const auto data = generate_campaigns(small_config(1000, 9));
  std::stringstream buf;
  write_dataset(data, buf);
  CHECK(read_dataset(buf) == data);

  std::stringstream header_only;
  for (std::size_t i = 0; i < dataset_columns().size(); ++i) header_only << (i ? "," : "") << dataset_columns()[i];
  header_only << "\n";
  CHECK(read_dataset(header_only).empty());

  std::string text = to_csv(data);
  const auto pos = text.find(",label");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 6, ",lab3l");
  std::istringstream broken(text);
  try {
    read_dataset(broken);
    FAIL("expected a schema error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }

  std::istringstream bad_value("campaign_id\nabc\n");
  CHECK_THROWS(read_dataset(bad_value));
}

TEST_CASE("sample validation") {
  CampaignSample s;
  s.impressions = 10;
  s.clicks = 3;
  s.z = 0.5;
  s.label = 2;
  s.tracked_conversions = 3;
  s.tk = 60.0;
  CHECK_THROWS_AS(validate_sample(s), std::invalid_argument);
  s.tracked_conversions = 1;
  CHECK_NOTHROW(validate_sample(s));
  s.clicks = 11;
  CHECK_THROWS_AS(validate_sample(s), std::invalid_argument);
}

TEST_CASE("dense features") {
  CampaignSample s;
  s.impressions = 999;
  s.clicks = 9;
  s.z = 0.0;
  s.pcoc_prior_product = 1.7;
  s.t0 = 10.0;
  s.tk = 1009.0;
  const auto f = dense_features(s);
  CHECK(std::find(f.begin(), f.end(), 3.0) != f.end());
  CHECK(std::find(f.begin(), f.end(), 1.7) != f.end());
  for (double v : f) CHECK(std::isfinite(v));
}
