#pragma once

// The fused predictor: sparse embeddings and normalized dense features feed a
// shared SELU trunk, which drives the edge head (bucket classifier), the PCOC
// head and the gate. The same class hosts the single-head value regression
// baselines.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldacp/bucket_tree.hpp"
#include "ldacp/dataset.hpp"
#include "ldacp/moe.hpp"
#include "ldacp/nn.hpp"

namespace ldacp {

enum class ModelKind {
  kLdacp,
  kValueRegressionCount,  // MAE on y
  kValueRegressionPcoc,   // MAE on PCOC, converted through z
};

enum class LabelMode { kSoft, kHard };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
std::string to_string(LabelMode m);
LabelMode label_mode_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kLdacp;
  int embedding_dim = 8;
  std::vector<int> trunk_widths{64, 32};
  int num_leaves = 64;
  LeafExpectation leaf_mode = LeafExpectation::kDistinctMean;
  SmoothingKernel kernel;
  LabelMode label_mode = LabelMode::kSoft;
  bool use_vrmp = true;  // false: bucket loss only, y_f is the prediction
  int n_products = 1141;
  int n_objectives = 8;

  void validate() const;
};

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double eps_y = 1.0;
  bool joint_moe = false;  // also route the gate loss into y_f and y_g
  // Gate-only mode: when set, y_f, y_g and the gate's trunk input are
  // evaluated at these parameters instead of the live ones. The gradient is
  // unchanged; this makes the loss value a function whose exact derivative it is.
  std::span<const double> frozen_experts;
};

struct LossBreakdown {
  double total = 0.0;
  double bcms = 0.0;
  double vrmp = 0.0;
  double moe = 0.0;
};

// Z-score statistics of the dense features, fitted on the training split.
struct FeatureNormalizer {
  std::array<double, kDenseFeatureCount> mean{};
  std::array<double, kDenseFeatureCount> scale{};

  static FeatureNormalizer fit(std::span<const CampaignSample> samples);
};

class Model {
 public:
  // Builds the tree and normalizer from `train` and initializes parameters.
  static Model create(const ModelConfig& config, std::span<const CampaignSample> train, std::uint64_t seed);

  // Reassembles a model from stored parts (checkpoint loading).
  static Model assemble(const ModelConfig& config, const FeatureNormalizer& normalizer, BucketTree tree,
                        std::vector<double> params);

  const ModelConfig& config() const { return config_; }
  const BucketTree& tree() const { return tree_; }
  const FeatureNormalizer& normalizer() const { return normalizer_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  Eigen::Index input_dim() const;

  // Training targets for the edge head, following config().label_mode.
  // Empty sets for the regression baselines.
  std::vector<SoftLabelSet> targets(std::span<const CampaignSample> samples) const;

  // Batch-mean loss at `params`. When grads is non-empty the gradient is
  // accumulated into it. `signature`, when given, receives a hash of every
  // piecewise branch taken (SELU sides, clamps, absolute-value signs).
  LossBreakdown loss(std::span<const double> params, std::span<const CampaignSample> batch,
                     std::span<const SoftLabelSet> targets, const LossWeights& weights, std::span<double> grads,
                     std::uint64_t* signature = nullptr) const;

  std::vector<FusionOutput> predict(std::span<const CampaignSample> samples) const;
  std::vector<FusionOutput> predict(std::span<const double> params, std::span<const CampaignSample> samples) const;

 private:
  Model() = default;
  void build_layout();

  struct Forward;
  Forward run(std::span<const double> params, std::span<const CampaignSample> batch, bool keep_cache) const;
  nn::Matrix encode(std::span<const double> params, std::span<const CampaignSample> batch) const;

  ModelConfig config_;
  FeatureNormalizer normalizer_;
  BucketTree tree_;
  std::vector<double> params_;

  nn::EmbeddingTable industry_emb_;
  nn::EmbeddingTable product_emb_;
  nn::EmbeddingTable objective_emb_;
  nn::EmbeddingTable type_emb_;
  nn::DenseNet trunk_;
  nn::DenseNet edge_head_;   // 2 logits per non-leaf node
  nn::DenseNet pcoc_head_;   // also the value head of the regression baselines
  nn::DenseNet gate_head_;
};

}  // namespace ldacp
