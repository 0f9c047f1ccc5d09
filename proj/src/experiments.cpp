#include "ldacp/experiments.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace ldacp {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kWoSmoothing: return "wo-smoothing";
    case Variant::kWoVrmp: return "wo-vrmp";
    case Variant::kHardTpm: return "hard-tpm";
    case Variant::kVrN: return "vr-n";
    case Variant::kVrP: return "vr-p";
    case Variant::kRm: return "rm";
  }
  return "full";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::kFull, Variant::kWoSmoothing, Variant::kWoVrmp, Variant::kHardTpm, Variant::kVrN,
                    Variant::kVrP, Variant::kRm}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown variant '" + s + "'");
}

ModelConfig variant_config(const ModelConfig& base, Variant v) {
  ModelConfig c = base;
  c.kind = ModelKind::kLdacp;
  switch (v) {
    case Variant::kFull:
    case Variant::kRm: break;
    case Variant::kWoSmoothing: c.label_mode = LabelMode::kHard; break;
    case Variant::kWoVrmp: c.use_vrmp = false; break;
    case Variant::kHardTpm:
      c.label_mode = LabelMode::kHard;
      c.use_vrmp = false;
      break;
    case Variant::kVrN: c.kind = ModelKind::kValueRegressionCount; break;
    case Variant::kVrP: c.kind = ModelKind::kValueRegressionPcoc; break;
  }
  return c;
}

std::vector<FusionOutput> rm_predictions(std::span<const CampaignSample> samples) {
  std::vector<FusionOutput> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({0.0, 0.0, s.z, s.z, s.z});
  return out;
}

VariantRun run_variant(Variant v, const DatasetSplit& split, const ModelConfig& base, const TrainConfig& train) {
  VariantRun run;
  run.variant = v;
  if (v == Variant::kRm) {
    run.predictions = rm_predictions(split.test);
    run.report = build_report(to_string(v), split.test, run.predictions);
    return run;
  }
  FitResult fitted = fit(split.train, split.validation, variant_config(base, v), train);
  if (fitted.diverged) spdlog::warn("{}: training diverged ({})", to_string(v), fitted.diagnostic);
  run.best_epoch = fitted.best_epoch;
  run.epochs = fitted.state.epochs_done;
  run.diverged = fitted.diverged;
  run.predictions = fitted.state.model.predict(split.test);
  run.report = build_report(to_string(v), split.test, run.predictions);
  return run;
}

bool AblationReport::majority_holds() const {
  for (const Vote& v : votes) {
    if (!v.mape_majority() || !v.cr_majority()) return false;
  }
  return !votes.empty();
}

AblationReport run_ablation(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                            const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants) {
  if (seeds.empty()) throw std::invalid_argument("ablation: at least one seed is required");
  base.validate();
  train.validate();
  std::vector<Variant> order{Variant::kFull};
  for (Variant v : variants) {
    if (v != Variant::kFull) order.push_back(v);
  }

  AblationReport report;
  for (std::size_t k = 1; k < order.size(); ++k) report.votes.push_back({order[k], 0, 0, 0});

  for (std::uint64_t seed : seeds) {
    const DatasetSplit split = split_dataset(data, seed);
    TrainConfig tc = train;
    tc.seed = seed;
    SeedRun sr;
    sr.seed = seed;
    for (Variant v : order) {
      spdlog::info("ablation seed {}: {}", seed, to_string(v));
      sr.runs.push_back(run_variant(v, split, base, tc));
    }
    const MetricsReport& full = sr.runs.front().report;
    bool all = true;
    for (std::size_t k = 1; k < sr.runs.size(); ++k) {
      const MetricsReport& other = sr.runs[k].report;
      Vote& vote = report.votes[k - 1];
      ++vote.seeds;
      const bool mape_win = full.mape.mape < other.mape.mape;
      const bool cr_win = full.cr > other.cr;
      vote.mape_wins += mape_win;
      vote.cr_wins += cr_win;
      all = all && mape_win && cr_win;
    }
    report.seeds_all_conditions += all && sr.runs.size() > 1;
    report.seeds.push_back(std::move(sr));
  }
  return report;
}

std::string format_ablation(const AblationReport& report) {
  std::string s;
  for (const SeedRun& sr : report.seeds) {
    s += fmt::format("seed {}\n{:<14} {:>10} {:>10} {:>8}\n", sr.seed, "variant", "MAPE", "CR", "epochs");
    for (const VariantRun& r : sr.runs) {
      s += fmt::format("{:<14} {:>10.4f} {:>10.4f} {:>8}\n", to_string(r.variant), r.report.mape.mape, r.report.cr,
                       r.epochs);
    }
    s += "\n";
  }
  s += "full vs challenger (seeds won)\n";
  for (const Vote& v : report.votes) {
    s += fmt::format("{:<14} MAPE {}/{}  CR {}/{}\n", to_string(v.challenger), v.mape_wins, v.seeds, v.cr_wins,
                     v.seeds);
  }
  s += fmt::format("majority vote: {}\n", report.majority_holds() ? "full wins" : "not met");
  s += fmt::format("seeds where full wins every comparison: {}/{}\n", report.seeds_all_conditions,
                   report.seeds.size());
  return s;
}

void write_ablation(const AblationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.txt").string());
    out << format_ablation(report);
  }
  {
    std::ofstream out(dir / "votes.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "votes.csv").string());
    out << "challenger,seeds,mape_wins,cr_wins,mape_majority,cr_majority\n";
    for (const Vote& v : report.votes) {
      out << fmt::format("{},{},{},{},{},{}\n", to_string(v.challenger), v.seeds, v.mape_wins, v.cr_wins,
                         v.mape_majority() ? 1 : 0, v.cr_majority() ? 1 : 0);
    }
  }
  for (const SeedRun& sr : report.seeds) {
    std::vector<MetricsReport> reports;
    for (const VariantRun& r : sr.runs) reports.push_back(r.report);
    write_comparison(reports, dir / fmt::format("seed_{}", sr.seed));
  }
}

}  // namespace ldacp
