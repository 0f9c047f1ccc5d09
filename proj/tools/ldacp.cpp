// ldacp: generate data, train, evaluate, run ablations and bid simulations.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ldacp/bidsim.hpp"
#include "ldacp/checkpoint.hpp"
#include "ldacp/config.hpp"
#include "ldacp/experiments.hpp"
#include "ldacp/generator.hpp"
#include "ldacp/metrics.hpp"
#include "ldacp/train.hpp"

namespace fs = std::filesystem;
using namespace ldacp;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::string split = "test";
};

// Bad configuration is a usage error (exit 1), raised before any compute.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const Options& o) {
  try {
    RunConfig c = o.config.empty() ? RunConfig() : load_run_config(o.config);
    if (o.seed) c.set_seed(*o.seed);
    c.validate();
    return c;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Dataset load_data(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("data file not found: " + path);
  return read_dataset(fs::path(path));
}

int cmd_generate(const Options& o) {
  const RunConfig c = resolve_config(o);
  const Dataset data = generate_campaigns(c.generator);
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_dataset(data, out);
  spdlog::info("wrote {} samples to {}", data.size(), out.string());
  return 0;
}

int cmd_train(const Options& o) {
  RunConfig c = resolve_config(o);
  std::optional<TrainState> start;
  if (!o.checkpoint.empty()) {
    start = load_checkpoint(o.checkpoint);
    // A resumed run keeps the split it was trained on unless --seed is given.
    if (!o.seed) c.set_seed(start->config.seed);
  }
  const Dataset data = load_data(o.data);
  for (const auto& s : data) validate_sample(s);
  const DatasetSplit split = split_dataset(data, c.seed);
  spdlog::info("split: {} train, {} validation, {} test", split.train.size(), split.validation.size(),
               split.test.size());

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "config.ini", run_config_to_string(c));
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "train_log.jsonl").string());
  auto on_epoch = [&log](const EpochRecord& r) {
    const std::string line = to_json_line(r);
    log << line << '\n';
    log.flush();
    spdlog::info("epoch {}: val MAPE {:.4f}, val CR {:.4f}", r.epoch, r.val_mape, r.val_cr);
  };

  const FitResult result = start ? resume(std::move(*start), split.train, split.validation, c.train, on_epoch)
                                 : fit(split.train, split.validation, c.model, c.train, on_epoch);
  save_checkpoint(result.state, dir / "checkpoint.json");
  spdlog::info("best epoch {} (val MAPE {:.6f}); checkpoint written to {}", result.best_epoch,
               result.state.best_val_mape, (dir / "checkpoint.json").string());
  if (result.diverged) {
    spdlog::error("training diverged: {}", result.diagnostic);
    return 2;
  }
  return 0;
}

std::span<const CampaignSample> pick_split(const DatasetSplit& split, const Dataset& all, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  if (name == "test") return split.test;
  return all;
}

int cmd_evaluate(const Options& o) {
  const RunConfig c = resolve_config(o);
  const TrainState state = load_checkpoint(o.checkpoint);
  const Dataset data = load_data(o.data);
  // The split follows the seed the model was trained with unless --seed is given.
  const std::uint64_t seed = o.seed ? *o.seed : state.config.seed;
  const DatasetSplit split = split_dataset(data, seed);
  const auto samples = pick_split(split, data, o.split);
  if (samples.empty()) throw std::runtime_error("the selected split is empty");
  const auto predictions = state.model.predict(samples);
  const MetricsReport report =
      build_report(to_string(state.model.config().kind), samples, predictions, c.zero_label_threshold);
  write_report(report, o.out, samples, predictions);
  std::cout << format_summary(report);
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig c = resolve_config(o);
  const Dataset data = load_data(o.data);
  const AblationReport report = run_ablation(data, c.model, c.train, c.ablation.seeds, c.ablation.variants);
  write_ablation(report, o.out);
  write_text(fs::path(o.out) / "config.ini", run_config_to_string(c));
  std::cout << format_ablation(report);
  return 0;
}

int cmd_simulate(const Options& o) {
  const RunConfig c = resolve_config(o);
  std::optional<TrainState> state;
  if (!o.checkpoint.empty()) state = load_checkpoint(o.checkpoint);
  OraclePredictor oracle;
  std::optional<ModelPredictor> model;
  SignalPolicy experiment{SignalMode::kPredicted, &oracle};
  if (state) {
    model.emplace(state->model);
    experiment.predictor = &*model;
  }
  const SignalPolicy control{SignalMode::kTracked, nullptr};
  const AbReport report = run_ab(c.scenario, control, experiment);
  write_ab_report(report, o.out);
  write_text(fs::path(o.out) / "config.ini", run_config_to_string(c));
  std::cout << format_ab_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("ldacp"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"Long-delayed ad conversion count prediction"};
  app.require_subcommand(1);
  Options o;
  auto add_seed = [&o](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s; }, "Override the run seed");
  };
  auto add_config = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI run configuration (defaults when absent)")->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("generate", "Generate a synthetic campaign dataset");
  add_config(gen);
  gen->add_option("--out", o.out, "Output CSV file")->required();
  add_seed(gen);

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.json and train_log.jsonl");
  add_config(train);
  train->add_option("--data", o.data, "Dataset CSV")->required();
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint")->check(CLI::ExistingFile);
  add_seed(train);

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint and write a metrics report");
  add_config(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", o.data, "Dataset CSV")->required();
  eval->add_option("--out", o.out, "Report directory")->required();
  eval->add_option("--split", o.split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}))
      ->capture_default_str();
  add_seed(eval);

  auto* ablate = app.add_subcommand("ablate", "Train the full model and its ablations over several seeds");
  add_config(ablate);
  ablate->add_option("--data", o.data, "Dataset CSV")->required();
  ablate->add_option("--out", o.out, "Report directory")->required();
  add_seed(ablate);

  auto* sim = app.add_subcommand("simulate", "Run the bidding A/B simulation");
  add_config(sim);
  sim->add_option("--checkpoint", o.checkpoint, "Model for the experiment arm (oracle when absent)")
      ->check(CLI::ExistingFile);
  sim->add_option("--out", o.out, "Report directory")->required();
  add_seed(sim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_evaluate(o);
    if (*ablate) return cmd_ablate(o);
    if (*sim) return cmd_simulate(o);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
