#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ldacp/bucket_tree.hpp"

using namespace ldacp;

namespace {

std::vector<std::int64_t> iota_labels(int n) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Long-tailed multiset: zeros, a geometric body and a few huge values.
std::vector<std::int64_t> long_tail(std::size_t n, double zero_share, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::lognormal_distribution<double> body(1.5, 1.6);
  std::vector<std::int64_t> v;
  for (std::size_t i = 0; i < n; ++i) {
    if (u(rng) < zero_share) {
      v.push_back(0);
    } else {
      v.push_back(1 + static_cast<std::int64_t>(body(rng)));
    }
  }
  v.push_back(33492);
  return v;
}

std::vector<std::int64_t> in_range(const std::vector<std::int64_t>& labels, std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> out;
  for (auto y : labels)
    if (y >= lo && y < hi) out.push_back(y);
  return out;
}

// Smallest integer m in (lo, hi) with at least half of the values below it;
// the node maximum when no such m leaves anything on the right.
std::int64_t oracle_cut(const std::vector<std::int64_t>& values, std::int64_t lo, std::int64_t hi) {
  const auto mx = *std::max_element(values.begin(), values.end());
  for (std::int64_t m = lo + 1; m < hi; ++m) {
    const auto below = std::count_if(values.begin(), values.end(), [m](auto y) { return y < m; });
    if (2 * below >= static_cast<std::int64_t>(values.size())) return std::min(m, mx);
  }
  return mx;
}

int oracle_leaf(const BucketTree& t, std::int64_t y) {
  int hit = -1;
  for (int leaf : t.leaves()) {
    const auto& n = t.node(leaf);
    if (n.lo <= y && y < n.hi) {
      REQUIRE(hit == -1);
      hit = leaf;
    }
  }
  return hit;
}

}  // namespace

TEST_CASE("eight distinct labels, four leaves") {
  const auto labels = iota_labels(8);
  const auto t = BucketTree::build(labels, 4);
  REQUIRE(t.leaves().size() == 4);
  const std::vector<std::pair<std::int64_t, std::int64_t>> expected{{0, 2}, {2, 4}, {4, 6}, {6, 8}};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(t.node(t.leaves()[k]).lo == expected[k].first);
    CHECK(t.node(t.leaves()[k]).hi == expected[k].second);
  }
  CHECK(t.lower() == 0);
  CHECK(t.upper() == 8);
  CHECK(t.depth() == 2);
  CHECK(t.node(t.leaves()[0]).expectation == 0.5);
}

TEST_CASE("a single distinct value gives a single leaf") {
  const std::vector<std::int64_t> labels(20, 5);
  const auto t = BucketTree::build(labels, 8);
  CHECK(t.leaves().size() == 1);
  CHECK(t.non_leaves().empty());
  CHECK(t.node(0).expectation == 5.0);
}

TEST_CASE("zero-heavy labels collapse leaves") {
  const auto labels = long_tail(2000, 0.9, 17);
  const auto t = BucketTree::build(labels, 8);
  CHECK(t.leaves().size() < 8);
  CHECK(t.leaves().size() >= 2);
}

TEST_CASE("build rejects bad input") {
  const std::vector<std::int64_t> none;
  CHECK_THROWS_AS(BucketTree::build(none, 4), std::invalid_argument);
  CHECK_THROWS_AS(BucketTree::build(iota_labels(4), 1), std::invalid_argument);
}

TEST_CASE("structural invariants on random long-tailed label sets") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto labels = long_tail(500 + 150 * seed, 0.1 + 0.05 * static_cast<double>(seed % 6), seed);
    const int leaves = 2 + static_cast<int>(seed * 5 % 63);
    const auto t = BucketTree::build(labels, leaves);
    CHECK(t.lower() == *std::min_element(labels.begin(), labels.end()));
    CHECK(t.upper() == *std::max_element(labels.begin(), labels.end()) + 1);
    CHECK(static_cast<int>(t.leaves().size()) <= leaves);
    CHECK(t.depth() <= static_cast<int>(std::ceil(std::log2(leaves))));

    for (int i : t.non_leaves()) {
      const auto& n = t.node(i);
      CHECK(n.lo < n.cut);
      CHECK(n.cut < n.hi);
      const auto& l = t.node(2 * i + 1);
      const auto& r = t.node(2 * i + 2);
      CHECK(l.lo == n.lo);
      CHECK(l.hi == n.cut);
      CHECK(r.lo == n.cut);
      CHECK(r.hi == n.hi);
      // equal frequency up to ties: every copy of the median value goes left,
      // so the imbalance is below twice the boundary tie count
      const auto values = in_range(labels, n.lo, n.hi);
      CHECK(n.cut == oracle_cut(values, n.lo, n.hi));
      const auto left = in_range(values, n.lo, n.cut).size();
      const auto right = values.size() - left;
      const auto ties = static_cast<std::size_t>(std::max(std::count(values.begin(), values.end(), n.cut - 1),
                                                          std::count(values.begin(), values.end(), n.cut)));
      CHECK((left > right ? left - right : right - left) <= 2 * ties);
    }
    for (int leaf : t.leaves()) {
      const auto& n = t.node(leaf);
      const auto values = in_range(labels, n.lo, n.hi);
      CHECK(!values.empty());
      CHECK(n.expectation >= static_cast<double>(n.lo));
      CHECK(n.expectation < static_cast<double>(n.hi));
    }
    // exhaustive partition scan, capped
    const auto span = t.upper() - t.lower();
    const std::int64_t stride = std::max<std::int64_t>(1, span / 100000);
    for (std::int64_t y = t.lower(); y < t.upper(); y += stride) {
      const int leaf = oracle_leaf(t, y);
      CHECK(leaf >= 0);
      CHECK(t.leaf_containing(static_cast<double>(y)) == leaf);
    }
  }
}

TEST_CASE("path_nodes") {
  const auto t = BucketTree::build(iota_labels(8), 4);
  CHECK(path_nodes(t, 0) == std::vector<int>{0, 1, 3});
  // third leaf [4, 6)
  CHECK(path_nodes(t, 5) == std::vector<int>{0, 2, 5});
  // out of range is clipped to the right-most leaf
  CHECK(path_nodes(t, 8) == std::vector<int>{0, 2, 6});
  CHECK(clip_to_root(t, 8) == 7.0);
  CHECK(clip_to_root(t, -3) == 0.0);

  const auto labels = long_tail(3000, 0.3, 99);
  const auto big = BucketTree::build(labels, 64);
  for (std::int64_t y : {0, 1, 2, 5, 17, 120, 33492}) {
    const auto p = path_nodes(big, static_cast<double>(y));
    CHECK(p.front() == 0);
    CHECK(p.back() == oracle_leaf(big, y));
    for (std::size_t k = 1; k < p.size(); ++k) {
      CHECK((p[k] == 2 * p[k - 1] + 1 || p[k] == 2 * p[k - 1] + 2));
      const auto& n = big.node(p[k]);
      CHECK(n.lo <= y);
      CHECK(y < n.hi);
    }
  }
}

TEST_CASE("psi and h values") {
  CHECK(psi(10, 10, 1e-6) == 0.0);
  CHECK(psi(20, 10, 1e-6) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(psi(0, 10, 1e-6) == doctest::Approx(1e7));
  CHECK(h_map(0.0, 10.0) == 1.0);
  CHECK(h_map(0.1, 10.0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(h_map(10.0, 10.0) == doctest::Approx(3.720075976020836e-44).epsilon(1e-10));
  CHECK(h_map(0.3, 10.0) < h_map(0.2, 10.0));
}

TEST_CASE("soft labels at and around a cutoff") {
  const auto t = BucketTree::build(iota_labels(8), 4);
  const SmoothingKernel k;
  SUBCASE("y equal to the root cutoff") {
    const auto s = soft_labels(t, 4, k);
    REQUIRE(s.size() == 2);
    CHECK(s[0].node == 0);
    CHECK(s[0].p_right == 1.0);
    CHECK(s[0].p_left == 1.0);
    CHECK(s[0].left_kind == SideLoss::kClassification);
    CHECK(s[0].right_kind == SideLoss::kClassification);
  }
  SUBCASE("y below the cutoff") {
    const auto s = soft_labels(t, 3, k);
    CHECK(s[0].p_left == 1.0);
    CHECK(s[0].p_right == doctest::Approx(std::exp(-10.0 * 1.0 / (3.0 + 1e-6))));
    CHECK(s[0].right_kind == SideLoss::kRegression);
  }
  SUBCASE("far from the cutoff the off side underflows to zero") {
    const std::vector<std::int64_t> labels{0, 0, 0, 1000, 1001, 1002};
    const auto wide = BucketTree::build(labels, 2);
    const auto s = soft_labels(wide, 0, k);
    REQUIRE(s.size() == 1);
    CHECK(s[0].p_left == 1.0);
    CHECK(s[0].p_right == 0.0);
    CHECK(s[0].right_kind == SideLoss::kClassification);
  }
}

TEST_CASE("soft label invariants on a long-tailed tree") {
  const auto labels = long_tail(4000, 0.2, 5);
  const auto t = BucketTree::build(labels, 64);
  const SmoothingKernel k;
  for (std::size_t j = 0; j < labels.size(); j += 7) {
    const double y = static_cast<double>(labels[j]);
    const auto s = soft_labels(t, y, k);
    const auto path = path_nodes(t, y);
    REQUIRE(s.size() + 1 == path.size());
    for (std::size_t e = 0; e < s.size(); ++e) {
      CHECK(s[e].node == path[e]);
      const bool left = path[e + 1] == 2 * path[e] + 1;
      CHECK((left ? s[e].p_left : s[e].p_right) == 1.0);
      const double off = left ? s[e].p_right : s[e].p_left;
      CHECK(off >= 0.0);
      CHECK(off <= 1.0);
      CHECK((off == 0.0 || off >= kSoftLabelFloor));
    }
    const auto hard = hard_labels(t, y);
    REQUIRE(hard.size() == s.size());
    for (std::size_t e = 0; e < s.size(); ++e) CHECK(hard[e].p_left + hard[e].p_right == 1.0);
  }
}

TEST_CASE("soft label continuity from the left of a cutoff") {
  // Treating y as real, the right-side label approaches 1 as y -> m from below.
  const std::vector<std::int64_t> labels{0, 1, 2, 3, 100, 200, 300, 400};
  const auto t = BucketTree::build(labels, 2);
  const double m = static_cast<double>(t.node(0).cut);
  const SmoothingKernel k;
  double prev = 2.0;
  for (double delta : {1.0, 0.1, 0.01}) {
    const auto s = soft_labels(t, m - delta * m, k);
    const double gap = std::abs(s[0].p_right - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(soft_labels(t, m, k)[0].p_right == 1.0);
  CHECK(std::abs(soft_labels(t, m - 1e-9, k)[0].p_right - 1.0) < 1e-6);
}

TEST_CASE("leaf expectations") {
  SUBCASE("singleton and pair") {
    const std::vector<std::int64_t> labels{0, 1, 3};
    std::vector<TreeNode> nodes(3);
    nodes[0] = {true, false, 0, 2, 4, 0.0, -1};
    nodes[1] = {true, true, 0, 0, 2, 0.0, -1};
    nodes[2] = {true, true, 2, 0, 4, 0.0, -1};
    const auto t = BucketTree::from_nodes(nodes);
    const auto e = leaf_expectations(t, labels);
    CHECK(e[0] == 0.5);
    CHECK(e[1] == 3.0);
  }
  SUBCASE("tail leaf uses distinct values") {
    const std::vector<std::int64_t> labels{0, 5, 99, 100, 100, 100, 200, 33492};
    std::vector<TreeNode> nodes(3);
    nodes[0] = {true, false, 0, 100, 33493, 0.0, -1};
    nodes[1] = {true, true, 0, 0, 100, 0.0, -1};
    nodes[2] = {true, true, 100, 0, 33493, 0.0, -1};
    const auto t = BucketTree::from_nodes(nodes);
    CHECK(leaf_expectations(t, labels)[1] == 11264.0);
    CHECK(leaf_expectations(t, labels, LeafExpectation::kSampleMean)[1] ==
          doctest::Approx((100.0 * 3 + 200 + 33492) / 5.0));
    CHECK(leaf_expectations(t, labels, LeafExpectation::kMidpoint)[1] == 0.5 * (100 + 33493));
  }
  SUBCASE("an empty leaf is an error") {
    const std::vector<std::int64_t> labels{0, 1};
    std::vector<TreeNode> nodes(3);
    nodes[0] = {true, false, 0, 5, 10, 0.0, -1};
    nodes[1] = {true, true, 0, 0, 5, 0.0, -1};
    nodes[2] = {true, true, 5, 0, 10, 0.0, -1};
    CHECK_THROWS(leaf_expectations(BucketTree::from_nodes(nodes), labels));
  }
}

TEST_CASE("from_nodes validates the partition") {
  std::vector<TreeNode> nodes(3);
  nodes[0] = {true, false, 0, 5, 10, 0.0, -1};
  nodes[1] = {true, true, 0, 0, 5, 1.0, -1};
  nodes[2] = {true, true, 6, 0, 10, 7.0, -1};
  CHECK_THROWS_AS(BucketTree::from_nodes(nodes), std::invalid_argument);
  nodes[2].lo = 5;
  CHECK_NOTHROW(BucketTree::from_nodes(nodes));
  nodes[0].cut = 10;
  CHECK_THROWS_AS(BucketTree::from_nodes(nodes), std::invalid_argument);
}

TEST_CASE("kernel validation") {
  CHECK_THROWS(SmoothingKernel{0.0, 10.0}.validate());
  CHECK_THROWS(SmoothingKernel{1e-6, 0.0}.validate());
  CHECK_NOTHROW(SmoothingKernel{}.validate());
}
