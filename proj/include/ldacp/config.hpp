#pragma once

// Run configuration shared by every subcommand, stored as an INI file.
//
//   [run]        seed
//   [generator]  GeneratorConfig fields (seed comes from [run])
//   [model]      kind, embedding_dim, trunk_widths, num_leaves, leaf_mode,
//                kernel_eps, kernel_sharpness, label_mode, use_vrmp
//   [train]      TrainConfig fields (seed comes from [run])
//   [metrics]    zero_label_threshold
//   [ablation]   seeds, variants (comma lists)
//   [scenario]   ScenarioConfig fields; campaign_type is a type name or mixed
//
// Missing keys keep their defaults; unknown sections or keys are errors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ldacp/bidsim.hpp"
#include "ldacp/experiments.hpp"
#include "ldacp/generator.hpp"
#include "ldacp/metrics.hpp"
#include "ldacp/model.hpp"
#include "ldacp/train.hpp"

namespace ldacp {

struct AblationSettings {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<Variant> variants{Variant::kWoSmoothing, Variant::kWoVrmp};
};

struct RunConfig {
  std::uint64_t seed = 42;
  GeneratorConfig generator;
  ModelConfig model;
  TrainConfig train;
  double zero_label_threshold = kDefaultZeroLabelThreshold;
  AblationSettings ablation;
  ScenarioConfig scenario;

  RunConfig() { propagate(); }

  // Copies the global seed and the generator's vocabulary sizes into the
  // sections that depend on them. Called by the readers and by set_seed.
  void propagate();
  void set_seed(std::uint64_t s);
  void validate() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig parse_run_config_string(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its current value; parse_run_config(write) reproduces the config.
void write_run_config(const RunConfig& config, std::ostream& out);
std::string run_config_to_string(const RunConfig& config);

}  // namespace ldacp
