#include "ldacp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "ldacp/metrics.hpp"

namespace ldacp {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("train: alpha and beta must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: lr must be finite and >= 0");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (!(eps_y >= 0.0)) throw std::invalid_argument("train: eps_y must be >= 0");
}

bool EarlyStopper::update(int epoch, double value) {
  if (best_epoch_ < 0 || value < best_) {
    best_ = value;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss_total"] = r.train.total;
  j["loss_bcms"] = r.train.bcms;
  j["loss_vrmp"] = r.train.vrmp;
  j["loss_moe"] = r.train.moe;
  j["val_mape"] = r.val_mape;
  j["val_cr"] = r.val_cr;
  return j.dump();
}

EpochRecord evaluate_epoch(const Model& model, std::span<const CampaignSample> validation, int epoch) {
  const auto predictions = model.predict(validation);
  std::vector<double> y_final;
  y_final.reserve(predictions.size());
  for (const auto& p : predictions) y_final.push_back(p.y_final);
  const auto labels = labels_of(validation);
  EpochRecord r;
  r.epoch = epoch;
  r.val_mape = mape(y_final, labels).mape;
  r.val_cr = compliance_rate(y_final, labels);
  return r;
}

namespace {

struct Snapshot {
  std::vector<double> params;
  nn::AdamState adam;
};

FitResult run_training(TrainState state, std::span<const CampaignSample> train,
                       std::span<const CampaignSample> validation, const TrainConfig& config,
                       const EpochCallback& on_epoch, bool evaluate_start) {
  config.validate();
  if (train.empty() || validation.empty()) throw std::invalid_argument("fit: train and validation must be non-empty");

  FitResult result{std::move(state), {}, 0, false, {}};
  TrainState& st = result.state;
  st.config = config;
  st.adam.lr = config.lr;
  Model& model = st.model;
  const LossWeights weights = config.weights();
  const auto targets = model.targets(train);

  EarlyStopper stopper(config.patience);
  Snapshot best{model.params(), st.adam};
  if (evaluate_start) {
    EpochRecord r = evaluate_epoch(model, validation, 0);
    stopper.update(st.epochs_done, r.val_mape);
    result.best_epoch = st.epochs_done;
    st.best_val_mape = r.val_mape;
    result.log.push_back(r);
    if (on_epoch) on_epoch(r);
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grads(model.parameter_count());
  std::vector<CampaignSample> batch;
  std::vector<SoftLabelSet> batch_targets;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int e = 0; e < config.max_epochs; ++e) {
    const int epoch = st.epochs_done + 1;
    std::mt19937_64 rng(config.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown sum;
    for (std::size_t begin = 0; begin < order.size() && !result.diverged; begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      batch.clear();
      batch_targets.clear();
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(train[order[k]]);
        batch_targets.push_back(targets[order[k]]);
      }
      std::fill(grads.begin(), grads.end(), 0.0);
      const LossBreakdown l = model.loss(model.params(), batch, batch_targets, weights, grads);
      if (!std::isfinite(l.total)) {
        result.diverged = true;
        result.diagnostic = fmt::format("non-finite loss at epoch {}, batch starting at {}", epoch, begin);
        break;
      }
      try {
        nn::adam_step(model.params(), grads, st.adam);
      } catch (const nn::NonFiniteGradient& ex) {
        result.diverged = true;
        result.diagnostic = fmt::format("epoch {}: {}", epoch, ex.what());
        break;
      }
      const double w = static_cast<double>(end - begin);
      sum.total += w * l.total;
      sum.bcms += w * l.bcms;
      sum.vrmp += w * l.vrmp;
      sum.moe += w * l.moe;
    }
    if (result.diverged) break;

    st.epochs_done = epoch;
    EpochRecord r = evaluate_epoch(model, validation, epoch);
    const double n = static_cast<double>(train.size());
    r.train = {sum.total / n, sum.bcms / n, sum.vrmp / n, sum.moe / n};
    result.log.push_back(r);
    if (on_epoch) on_epoch(r);
    if (stopper.update(epoch, r.val_mape)) {
      best = {model.params(), st.adam};
      result.best_epoch = epoch;
      st.best_val_mape = r.val_mape;
    }
    if (stopper.stop()) break;
  }

  if (stopper.best_epoch() >= 0 || result.diverged) {
    model.params() = best.params;
    st.adam = best.adam;
  }
  return result;
}

}  // namespace

FitResult fit(std::span<const CampaignSample> train, std::span<const CampaignSample> validation,
              const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  Model model = Model::create(model_config, train, config.seed);
  TrainState state{std::move(model), nn::AdamState::for_size(0, config.lr), config, 0, 0.0};
  state.adam = nn::AdamState::for_size(state.model.parameter_count(), config.lr);
  return run_training(std::move(state), train, validation, config, on_epoch, false);
}

FitResult resume(TrainState state, std::span<const CampaignSample> train, std::span<const CampaignSample> validation,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  if (state.adam.first_moment.size() != state.model.parameter_count()) {
    state.adam = nn::AdamState::for_size(state.model.parameter_count(), config.lr);
  }
  return run_training(std::move(state), train, validation, config, on_epoch, true);
}

}  // namespace ldacp
