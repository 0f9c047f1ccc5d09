#pragma once

// Equal-frequency binary tree over integer label values, path sets and the
// non-normalized soft labels fitted by the bucket classifier.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ldacp {

struct SmoothingKernel {
  double eps = 1e-6;
  double sharpness = 10.0;

  void validate() const;
};

// How a leaf's expectation value is derived from the training labels in its range.
enum class LeafExpectation {
  kDistinctMean,  // mean of the distinct label values in [l, r)
  kSampleMean,    // mean over the label multiset in [l, r)
  kMidpoint,      // (l + r) / 2
};

std::string to_string(LeafExpectation e);
LeafExpectation leaf_expectation_from_string(const std::string& s);

// Node i has children 2i+1 (range [lo, cut)) and 2i+2 (range [cut, hi)).
struct TreeNode {
  bool present = false;
  bool leaf = false;
  std::int64_t lo = 0;
  std::int64_t cut = 0;  // non-leaf only
  std::int64_t hi = 0;
  double expectation = 0.0;  // leaf only
  int head_slot = -1;        // non-leaf only: position in BucketTree::non_leaves()
};

class BucketTree {
 public:
  BucketTree() = default;

  // Breadth-first equal-frequency splitting; depth is capped at
  // ceil(log2(num_leaves)) and splitting stops once num_leaves leaves exist.
  // Nodes holding a single distinct value stay leaves.
  static BucketTree build(std::span<const std::int64_t> labels, int num_leaves,
                          LeafExpectation mode = LeafExpectation::kDistinctMean);

  // Rebuilds index structures from a stored node array; validates the
  // partition invariants.
  static BucketTree from_nodes(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int depth() const { return depth_; }
  const std::vector<int>& leaves() const { return leaves_; }
  const std::vector<int>& non_leaves() const { return non_leaves_; }
  std::int64_t lower() const { return nodes_.front().lo; }
  std::int64_t upper() const { return nodes_.front().hi; }

  // Leaf whose range contains y (y clipped into [lower, upper)).
  int leaf_containing(double y) const;

 private:
  void reindex();

  std::vector<TreeNode> nodes_;
  std::vector<int> leaves_;
  std::vector<int> non_leaves_;
  int depth_ = 0;
};

// Clips y into [lower, upper - 1]; emits a warning when clipping happens.
double clip_to_root(const BucketTree& tree, double y);

// Root-to-leaf chain of nodes whose ranges contain y (after clipping).
std::vector<int> path_nodes(const BucketTree& tree, double y);

double psi(double y, double m, double eps);
double h_map(double d, double sharpness);

enum class SideLoss { kClassification, kRegression };

struct SoftLabel {
  int node = 0;
  double p_left = 0.0;
  double p_right = 0.0;
  SideLoss left_kind = SideLoss::kClassification;
  SideLoss right_kind = SideLoss::kClassification;
};

using SoftLabelSet = std::vector<SoftLabel>;

// Soft labels below this are flushed to 0 and fitted as classification targets.
inline constexpr double kSoftLabelFloor = 1e-12;

// One entry per non-leaf node on the path of y.
SoftLabelSet soft_labels(const BucketTree& tree, double y, const SmoothingKernel& kernel);

// One-hot targets: 1 for the side containing y, 0 for the other.
SoftLabelSet hard_labels(const BucketTree& tree, double y);

// Expectations aligned with tree.leaves(). Throws if a leaf holds no label.
std::vector<double> leaf_expectations(const BucketTree& tree, std::span<const std::int64_t> labels,
                                      LeafExpectation mode = LeafExpectation::kDistinctMean);

}  // namespace ldacp
