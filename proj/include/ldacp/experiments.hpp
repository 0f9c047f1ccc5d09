#pragma once

// Baselines and the ablation runner. Every variant is trained on the same
// split with the same seed; only the ablated component differs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ldacp/metrics.hpp"
#include "ldacp/train.hpp"

namespace ldacp {

enum class Variant {
  kFull,
  kWoSmoothing,  // one-hot side labels
  kWoVrmp,       // bucket loss only, y_f is the prediction
  kHardTpm,      // hard labels and no VRMP
  kVrN,
  kVrP,
  kRm,  // y_hat = z, no training
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Model settings of a variant derived from the full model's settings.
ModelConfig variant_config(const ModelConfig& base, Variant v);

// y_hat = z. No tracked-conversion clamp.
std::vector<FusionOutput> rm_predictions(std::span<const CampaignSample> samples);

struct VariantRun {
  Variant variant = Variant::kFull;
  MetricsReport report;  // on the test split
  std::vector<FusionOutput> predictions;  // test split, aligned with its samples
  int best_epoch = 0;
  int epochs = 0;
  bool diverged = false;
};

// Trains (or, for RM, just applies) one variant and evaluates on the test split.
VariantRun run_variant(Variant v, const DatasetSplit& split, const ModelConfig& base, const TrainConfig& train);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<VariantRun> runs;
};

// Full model against one other variant, over all seeds.
struct Vote {
  Variant challenger = Variant::kWoSmoothing;
  int seeds = 0;
  int mape_wins = 0;  // seeds where full has strictly lower MAPE
  int cr_wins = 0;    // seeds where full has strictly higher CR
  bool mape_majority() const { return 2 * mape_wins > seeds; }
  bool cr_majority() const { return 2 * cr_wins > seeds; }
};

struct AblationReport {
  std::vector<SeedRun> seeds;
  std::vector<Vote> votes;
  // Seeds where full beats every challenger on both metrics at once.
  int seeds_all_conditions = 0;

  bool majority_holds() const;
};

// Each seed drives both the train/validation split and the training RNG.
// The full model is always trained; `variants` lists the challengers.
AblationReport run_ablation(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                            const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants);

std::string format_ablation(const AblationReport& report);

// summary.txt, votes.csv, and per seed a comparison directory seed_<s>/.
void write_ablation(const AblationReport& report, const std::filesystem::path& dir);

}  // namespace ldacp
