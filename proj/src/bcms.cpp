#include "ldacp/bcms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldacp/nn.hpp"

namespace ldacp {

std::vector<EdgePair> edge_probabilities(std::span<const double> logits) {
  if (logits.size() % 2 != 0) throw std::invalid_argument("edge_probabilities: odd logit count");
  std::vector<EdgePair> out(logits.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {nn::sigmoid(logits[2 * k]), nn::sigmoid(logits[2 * k + 1])};
  }
  return out;
}

namespace {

struct SideTerm {
  double loss;
  double dlogit;  // derivative w.r.t. the pre-sigmoid logit
};

SideTerm side_term(double target, double predicted, SideLoss kind) {
  if (kind == SideLoss::kClassification) {
    const double clamped = std::clamp(predicted, kCeClamp, 1.0 - kCeClamp);
    const double loss = -target * std::log(clamped) - (1.0 - target) * std::log(1.0 - clamped);
    const bool active = clamped == predicted;
    return {loss, active ? predicted - target : 0.0};
  }
  const double diff = predicted - target;
  return {diff * diff, 2.0 * diff * predicted * (1.0 - predicted)};
}

int slot_of(const BucketTree& tree, int node, std::size_t n_pairs) {
  const int slot = tree.node(node).head_slot;
  if (slot < 0 || static_cast<std::size_t>(slot) >= n_pairs) {
    throw std::invalid_argument("bcms: no prediction pair for node " + std::to_string(node));
  }
  return slot;
}

}  // namespace

double bcms_loss(const BucketTree& tree, const SoftLabelSet& soft, std::span<const EdgePair> predicted) {
  double total = 0.0;
  for (const SoftLabel& s : soft) {
    const EdgePair& p = predicted[static_cast<std::size_t>(slot_of(tree, s.node, predicted.size()))];
    total += side_term(s.p_left, p.left, s.left_kind).loss;
    total += side_term(s.p_right, p.right, s.right_kind).loss;
  }
  return total;
}

double bcms_loss_backward(const BucketTree& tree, const SoftLabelSet& soft,
                          std::span<const EdgePair> predicted, double scale, std::span<double> dlogits) {
  double total = 0.0;
  for (const SoftLabel& s : soft) {
    const auto slot = static_cast<std::size_t>(slot_of(tree, s.node, predicted.size()));
    const EdgePair& p = predicted[slot];
    const SideTerm l = side_term(s.p_left, p.left, s.left_kind);
    const SideTerm r = side_term(s.p_right, p.right, s.right_kind);
    total += l.loss + r.loss;
    dlogits[2 * slot] += scale * l.dlogit;
    dlogits[2 * slot + 1] += scale * r.dlogit;
  }
  return total;
}

namespace {

double left_conditional(const EdgePair& p) {
  const double sum = p.left + p.right;
  return sum < kDegenerateEdgeSum ? 0.5 : p.left / sum;
}

}  // namespace

BcmsPrediction infer_yf(const BucketTree& tree, std::span<const EdgePair> predicted) {
  const auto& nodes = tree.nodes();
  if (predicted.size() < tree.non_leaves().size()) {
    throw std::invalid_argument("infer_yf: missing predictions for non-leaf nodes");
  }
  std::vector<double> reach(nodes.size(), 0.0);
  reach[0] = 1.0;
  BcmsPrediction out;
  out.leaf_weights.reserve(tree.leaves().size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (!n.present) continue;
    if (n.leaf) {
      out.leaf_weights.push_back(reach[i]);
      out.y_f += n.expectation * reach[i];
      continue;
    }
    const double c = left_conditional(predicted[static_cast<std::size_t>(n.head_slot)]);
    reach[2 * i + 1] = reach[i] * c;
    reach[2 * i + 2] = reach[i] * (1.0 - c);
  }
  return out;
}

void infer_yf_backward(const BucketTree& tree, std::span<const EdgePair> predicted, double upstream,
                       std::span<double> dlogits) {
  const auto& nodes = tree.nodes();
  std::vector<double> reach(nodes.size(), 0.0);
  std::vector<double> value(nodes.size(), 0.0);  // expected leaf value within the subtree
  reach[0] = 1.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (!n.present || n.leaf) continue;
    const double c = left_conditional(predicted[static_cast<std::size_t>(n.head_slot)]);
    reach[2 * i + 1] = reach[i] * c;
    reach[2 * i + 2] = reach[i] * (1.0 - c);
  }
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const TreeNode& n = nodes[i];
    if (!n.present) continue;
    if (n.leaf) {
      value[i] = n.expectation;
      continue;
    }
    const EdgePair& p = predicted[static_cast<std::size_t>(n.head_slot)];
    const double c = left_conditional(p);
    value[i] = c * value[2 * i + 1] + (1.0 - c) * value[2 * i + 2];
    const double sum = p.left + p.right;
    if (sum < kDegenerateEdgeSum) continue;
    const double dyf_dc = reach[i] * (value[2 * i + 1] - value[2 * i + 2]);
    const double dc_dleft = p.right / (sum * sum);
    const double dc_dright = -p.left / (sum * sum);
    const auto slot = static_cast<std::size_t>(n.head_slot);
    dlogits[2 * slot] += upstream * dyf_dc * dc_dleft * p.left * (1.0 - p.left);
    dlogits[2 * slot + 1] += upstream * dyf_dc * dc_dright * p.right * (1.0 - p.right);
  }
}

}  // namespace ldacp
