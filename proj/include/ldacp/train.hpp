#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldacp/dataset.hpp"
#include "ldacp/model.hpp"
#include "ldacp/nn.hpp"

namespace ldacp {

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  int batch_size = 128;
  double lr = 1e-3;
  int max_epochs = 20;
  int patience = 2;
  double eps_y = 1.0;
  bool joint_moe = false;
  std::uint64_t seed = 42;

  void validate() const;
  LossWeights weights() const { return {alpha, beta, eps_y, joint_moe, {}}; }
};

// Tracks the best validation MAPE; stop() turns true once `patience`
// consecutive epochs fail to improve on it.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when `value` is a new best.
  bool update(int epoch, double value);
  bool stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  int best_epoch_ = -1;
  double best_ = 0.0;
  int since_best_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 0 is the pre-training evaluation of a resumed model
  LossBreakdown train;
  double val_mape = 0.0;
  double val_cr = 0.0;
};

std::string to_json_line(const EpochRecord& r);

struct TrainState {
  Model model;
  nn::AdamState adam;
  TrainConfig config;
  int epochs_done = 0;
  double best_val_mape = 0.0;
};

struct FitResult {
  TrainState state;  // parameters of the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Validation metrics of a model (MAPE over y > 0 of the clamped predictions).
EpochRecord evaluate_epoch(const Model& model, std::span<const CampaignSample> validation, int epoch);

// Mini-batch Adam on the total loss with early stopping on validation MAPE.
// A non-finite loss or gradient stops training; the result then carries the
// last good parameters, diverged = true and a diagnostic.
FitResult fit(std::span<const CampaignSample> train, std::span<const CampaignSample> validation,
              const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Continues training a stored state. Epoch 0 of the log re-evaluates the
// loaded parameters on the validation set.
FitResult resume(TrainState state, std::span<const CampaignSample> train, std::span<const CampaignSample> validation,
                 const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace ldacp
