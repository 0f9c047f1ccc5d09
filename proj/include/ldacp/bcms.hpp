#pragma once

// Bucket classifier with label smoothing: per-edge probabilities, the mixed
// cross-entropy / squared-error loss and expectation inference over the tree.

#include <span>
#include <vector>

#include "ldacp/bucket_tree.hpp"

namespace ldacp {

struct EdgePair {
  double left = 0.5;
  double right = 0.5;
};

// Predicted probabilities are clamped into [kCeClamp, 1 - kCeClamp] before log.
inline constexpr double kCeClamp = 1e-7;
// Below this sum both conditionals fall back to 0.5.
inline constexpr double kDegenerateEdgeSum = 1e-12;

// logits holds (left, right) per non-leaf head slot: [2k] and [2k + 1].
std::vector<EdgePair> edge_probabilities(std::span<const double> logits);

// Per-sample loss summed over both sides of every entry. `predicted` is
// indexed by head slot.
double bcms_loss(const BucketTree& tree, const SoftLabelSet& soft, std::span<const EdgePair> predicted);

// Same loss; adds scale * d(loss)/d(logit) into dlogits (layout as above).
double bcms_loss_backward(const BucketTree& tree, const SoftLabelSet& soft,
                          std::span<const EdgePair> predicted, double scale, std::span<double> dlogits);

struct BcmsPrediction {
  std::vector<double> leaf_weights;  // aligned with tree.leaves()
  double y_f = 0.0;
};

BcmsPrediction infer_yf(const BucketTree& tree, std::span<const EdgePair> predicted);

// Adds upstream * d(y_f)/d(logit) into dlogits.
void infer_yf_backward(const BucketTree& tree, std::span<const EdgePair> predicted, double upstream,
                       std::span<double> dlogits);

}  // namespace ldacp
