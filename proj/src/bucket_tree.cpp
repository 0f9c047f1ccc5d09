#include "ldacp/bucket_tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ldacp {

void SmoothingKernel::validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("smoothing kernel eps must be > 0");
  if (!(sharpness > 0.0)) throw std::invalid_argument("smoothing kernel sharpness must be > 0");
}

std::string to_string(LeafExpectation e) {
  switch (e) {
    case LeafExpectation::kDistinctMean: return "distinct_mean";
    case LeafExpectation::kSampleMean: return "sample_mean";
    case LeafExpectation::kMidpoint: return "midpoint";
  }
  return "distinct_mean";
}

LeafExpectation leaf_expectation_from_string(const std::string& s) {
  if (s == "distinct_mean") return LeafExpectation::kDistinctMean;
  if (s == "sample_mean") return LeafExpectation::kSampleMean;
  if (s == "midpoint") return LeafExpectation::kMidpoint;
  throw std::invalid_argument("unknown leaf expectation mode '" + s + "'");
}

namespace {

int ceil_log2(int n) {
  int d = 0;
  while ((1 << d) < n) ++d;
  return d;
}

double expectation_of(std::span<const std::int64_t> sorted_in_range, std::int64_t lo, std::int64_t hi,
                      LeafExpectation mode) {
  if (mode == LeafExpectation::kMidpoint) return 0.5 * static_cast<double>(lo + hi);
  if (sorted_in_range.empty()) {
    throw std::logic_error("leaf [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           ") holds no training label");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < sorted_in_range.size(); ++k) {
    if (mode == LeafExpectation::kDistinctMean && k > 0 && sorted_in_range[k] == sorted_in_range[k - 1]) {
      continue;
    }
    sum += static_cast<double>(sorted_in_range[k]);
    ++count;
  }
  return sum / static_cast<double>(count);
}

}  // namespace

BucketTree BucketTree::build(std::span<const std::int64_t> labels, int num_leaves, LeafExpectation mode) {
  if (labels.empty()) throw std::invalid_argument("build_tree: no training labels");
  if (num_leaves < 2) throw std::invalid_argument("build_tree: num_leaves must be >= 2");

  std::vector<std::int64_t> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());

  struct Pending {
    int index;
    int depth;
    std::size_t begin;
    std::size_t end;
  };

  const int max_depth = ceil_log2(num_leaves);
  BucketTree tree;
  tree.nodes_.resize(1);
  tree.nodes_[0] = TreeNode{true, true, sorted.front(), 0, sorted.back() + 1, 0.0, -1};

  int leaf_count = 1;
  std::deque<Pending> queue{{0, 0, 0, sorted.size()}};
  while (!queue.empty()) {
    const Pending p = queue.front();
    queue.pop_front();
    TreeNode& node = tree.nodes_[static_cast<std::size_t>(p.index)];
    const std::span<const std::int64_t> values(sorted.data() + p.begin, p.end - p.begin);
    const bool splittable = values.front() != values.back();
    if (p.depth >= max_depth || leaf_count >= num_leaves || !splittable) {
      node.expectation = expectation_of(values, node.lo, node.hi, mode);
      continue;
    }
    // Smallest integer cutoff with at least half of the node's samples below it.
    const std::size_t n = values.size();
    const std::int64_t median_value = values[(n + 1) / 2 - 1];
    std::int64_t cut = median_value + 1;
    if (cut > values.back()) cut = values.back();
    const auto split = static_cast<std::size_t>(
        std::lower_bound(values.begin(), values.end(), cut) - values.begin());

    node.leaf = false;
    node.cut = cut;
    const std::int64_t lo = node.lo;
    const std::int64_t hi = node.hi;
    const int left = 2 * p.index + 1;
    const int right = 2 * p.index + 2;
    if (tree.nodes_.size() <= static_cast<std::size_t>(right)) {
      tree.nodes_.resize(static_cast<std::size_t>(right) + 1);
    }
    tree.nodes_[static_cast<std::size_t>(left)] = TreeNode{true, true, lo, 0, cut, 0.0, -1};
    tree.nodes_[static_cast<std::size_t>(right)] = TreeNode{true, true, cut, 0, hi, 0.0, -1};
    ++leaf_count;
    queue.push_back({left, p.depth + 1, p.begin, p.begin + split});
    queue.push_back({right, p.depth + 1, p.begin + split, p.end});
  }
  if (leaf_count < num_leaves) {
    spdlog::warn("build_tree: {} leaves requested but the labels only support {}", num_leaves, leaf_count);
  }
  tree.reindex();
  return tree;
}

BucketTree BucketTree::from_nodes(std::vector<TreeNode> nodes) {
  if (nodes.empty() || !nodes[0].present) throw std::invalid_argument("tree: missing root node");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (!n.present) continue;
    if (!(n.lo < n.hi)) throw std::invalid_argument("tree: empty range at node " + std::to_string(i));
    const std::size_t l = 2 * i + 1;
    const std::size_t r = 2 * i + 2;
    if (n.leaf) {
      if (l < nodes.size() && nodes[l].present) {
        throw std::invalid_argument("tree: leaf " + std::to_string(i) + " has children");
      }
      continue;
    }
    if (!(n.lo < n.cut && n.cut < n.hi)) {
      throw std::invalid_argument("tree: cutoff outside range at node " + std::to_string(i));
    }
    if (r >= nodes.size() || !nodes[l].present || !nodes[r].present) {
      throw std::invalid_argument("tree: non-leaf " + std::to_string(i) + " lacks children");
    }
    if (nodes[l].lo != n.lo || nodes[l].hi != n.cut || nodes[r].lo != n.cut || nodes[r].hi != n.hi) {
      throw std::invalid_argument("tree: children do not partition node " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].present && !nodes[(i - 1) / 2].present) {
      throw std::invalid_argument("tree: orphan node " + std::to_string(i));
    }
  }
  BucketTree tree;
  tree.nodes_ = std::move(nodes);
  tree.reindex();
  return tree;
}

void BucketTree::reindex() {
  leaves_.clear();
  non_leaves_.clear();
  depth_ = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    TreeNode& n = nodes_[i];
    if (!n.present) continue;
    int d = 0;
    for (std::size_t k = i; k > 0; k = (k - 1) / 2) ++d;
    depth_ = std::max(depth_, d);
    if (n.leaf) {
      n.head_slot = -1;
      leaves_.push_back(static_cast<int>(i));
    } else {
      n.head_slot = static_cast<int>(non_leaves_.size());
      non_leaves_.push_back(static_cast<int>(i));
    }
  }
}

int BucketTree::leaf_containing(double y) const {
  y = std::clamp(y, static_cast<double>(lower()), static_cast<double>(upper() - 1));
  int i = 0;
  while (!nodes_[static_cast<std::size_t>(i)].leaf) {
    i = y < static_cast<double>(nodes_[static_cast<std::size_t>(i)].cut) ? 2 * i + 1 : 2 * i + 2;
  }
  return i;
}

double clip_to_root(const BucketTree& tree, double y) {
  const double lo = static_cast<double>(tree.lower());
  const double hi = static_cast<double>(tree.upper() - 1);
  if (y < lo || y >= static_cast<double>(tree.upper())) {
    const double clipped = std::clamp(y, lo, hi);
    spdlog::warn("label {} outside tree range [{}, {}); clipped to {}", y, tree.lower(), tree.upper(), clipped);
    return clipped;
  }
  return y;
}

std::vector<int> path_nodes(const BucketTree& tree, double y) {
  y = clip_to_root(tree, y);
  std::vector<int> path;
  int i = 0;
  for (;;) {
    path.push_back(i);
    const TreeNode& n = tree.node(i);
    if (n.leaf) break;
    i = y < static_cast<double>(n.cut) ? 2 * i + 1 : 2 * i + 2;
  }
  return path;
}

double psi(double y, double m, double eps) { return std::abs(y - m) / (y + eps); }

double h_map(double d, double sharpness) { return std::exp(-sharpness * d); }

namespace {

SideLoss kind_of(double p) {
  return (p == 0.0 || p == 1.0) ? SideLoss::kClassification : SideLoss::kRegression;
}

double floor_label(double p) { return p < kSoftLabelFloor ? 0.0 : p; }

}  // namespace

SoftLabelSet soft_labels(const BucketTree& tree, double y, const SmoothingKernel& kernel) {
  y = clip_to_root(tree, y);
  SoftLabelSet out;
  int i = 0;
  while (!tree.node(i).leaf) {
    const TreeNode& n = tree.node(i);
    const double m = static_cast<double>(n.cut);
    const bool in_left = y < m;  // y >= lo holds along the path
    const double distance = psi(y, m, kernel.eps);
    SoftLabel s;
    s.node = i;
    s.p_left = floor_label(h_map(in_left ? 0.0 : distance, kernel.sharpness));
    s.p_right = floor_label(h_map(in_left ? distance : 0.0, kernel.sharpness));
    s.left_kind = kind_of(s.p_left);
    s.right_kind = kind_of(s.p_right);
    out.push_back(s);
    i = in_left ? 2 * i + 1 : 2 * i + 2;
  }
  return out;
}

SoftLabelSet hard_labels(const BucketTree& tree, double y) {
  y = clip_to_root(tree, y);
  SoftLabelSet out;
  int i = 0;
  while (!tree.node(i).leaf) {
    const bool in_left = y < static_cast<double>(tree.node(i).cut);
    out.push_back(SoftLabel{i, in_left ? 1.0 : 0.0, in_left ? 0.0 : 1.0, SideLoss::kClassification,
                            SideLoss::kClassification});
    i = in_left ? 2 * i + 1 : 2 * i + 2;
  }
  return out;
}

std::vector<double> leaf_expectations(const BucketTree& tree, std::span<const std::int64_t> labels,
                                      LeafExpectation mode) {
  std::vector<std::int64_t> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(tree.leaves().size());
  for (int leaf : tree.leaves()) {
    const TreeNode& n = tree.node(leaf);
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), n.lo);
    const auto last = std::lower_bound(sorted.begin(), sorted.end(), n.hi);
    out.push_back(expectation_of(std::span<const std::int64_t>(sorted.data() + (first - sorted.begin()),
                                                               static_cast<std::size_t>(last - first)),
                                 n.lo, n.hi, mode));
  }
  return out;
}

}  // namespace ldacp
