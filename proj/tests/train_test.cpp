#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ldacp/checkpoint.hpp"
#include "ldacp/generator.hpp"
#include "ldacp/metrics.hpp"
#include "ldacp/train.hpp"
#include "ldacp/vrmp.hpp"

using namespace ldacp;

namespace {

const DatasetSplit& small_split() {
  static const DatasetSplit split = [] {
    GeneratorConfig g;
    g.n_samples = 4000;
    g.check_calibration = false;
    return split_dataset(generate_campaigns(g), 42);
  }();
  return split;
}

ModelConfig small_model() {
  ModelConfig m;
  m.num_leaves = 8;
  m.trunk_widths = {16, 8};
  m.embedding_dim = 4;
  return m;
}

TrainConfig quick(int epochs) {
  TrainConfig t;
  t.max_epochs = epochs;
  t.batch_size = 256;
  t.lr = 3e-3;
  return t;
}

nn::Objective objective(const Model& m, const Dataset& batch, const std::vector<SoftLabelSet>& targets,
                        const LossWeights& w) {
  nn::Objective o;
  o.value = [&m, &batch, &targets, w](std::span<const double> p) { return m.loss(p, batch, targets, w, {}).total; };
  o.gradient = [&m, &batch, &targets, w](std::span<const double> p, std::span<double> g) {
    m.loss(p, batch, targets, w, g);
  };
  o.branch_signature = [&m, &batch, &targets, w](std::span<const double> p) {
    std::uint64_t s = 0;
    m.loss(p, batch, targets, w, {}, &s);
    return s;
  };
  return o;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("early stopping trace") {
  EarlyStopper s(2);
  const double trace[] = {0.5, 0.4, 0.41, 0.42};
  int stopped_after = 0;
  for (int e = 1; e <= 4; ++e) {
    s.update(e, trace[e - 1]);
    if (s.stop()) {
      stopped_after = e;
      break;
    }
  }
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_value() == 0.4);
  CHECK(stopped_after == 4);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.max_epochs = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS(t.validate());
  t = TrainConfig{};
  t.lr = -1.0;
  CHECK_THROWS(t.validate());
}

TEST_CASE("model loss gradient matches finite differences") {
  const auto& sp = small_split();
  const Dataset batch(sp.train.begin(), sp.train.begin() + 200);
  for (bool joint : {true, false}) {
    CAPTURE(joint);
    const auto m = Model::create(small_model(), sp.train, 7);
    const auto targets = m.targets(batch);
    const std::vector<double> base = m.params();
    LossWeights w;
    w.joint_moe = joint;
    if (!joint) w.frozen_experts = base;
    const auto r = nn::grad_check(objective(m, batch, targets, w), base, 60, 1e-5, 11);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.probes == 60);
  }
}

TEST_CASE("baseline heads also have exact gradients") {
  const auto& sp = small_split();
  const Dataset batch(sp.train.begin(), sp.train.begin() + 200);
  for (ModelKind kind : {ModelKind::kValueRegressionCount, ModelKind::kValueRegressionPcoc}) {
    auto mc = small_model();
    mc.kind = kind;
    const auto m = Model::create(mc, sp.train, 8);
    const auto targets = m.targets(batch);
    const auto r = nn::grad_check(objective(m, batch, targets, LossWeights{}), m.params(), 40, 1e-5, 12);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("single epoch run and determinism") {
  const auto& sp = small_split();
  const auto a = fit(sp.train, sp.validation, small_model(), quick(1));
  const auto b = fit(sp.train, sp.validation, small_model(), quick(1));
  CHECK(a.log.size() == 1);
  CHECK(a.best_epoch == 1);
  CHECK(!a.diverged);
  CHECK(same_bits(a.state.model.params(), b.state.model.params()));
  CHECK(std::isfinite(a.log[0].val_mape));

  auto other = quick(1);
  other.seed = 43;
  CHECK(!same_bits(a.state.model.params(), fit(sp.train, sp.validation, small_model(), other).state.model.params()));
}

TEST_CASE("best parameters come from the best validation epoch") {
  const auto& sp = small_split();
  auto t = quick(6);
  t.patience = 1;
  const auto r = fit(sp.train, sp.validation, small_model(), t);
  REQUIRE(!r.log.empty());
  double best = 1e300;
  int best_epoch = 0;
  for (const auto& e : r.log) {
    if (e.val_mape < best) {
      best = e.val_mape;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.state.best_val_mape == best);
  CHECK(evaluate_epoch(r.state.model, sp.validation, 0).val_mape == best);
  // patience 1 stops right after the first non-improving epoch
  if (static_cast<int>(r.log.size()) < t.max_epochs) CHECK(r.log.back().val_mape >= best);
}

TEST_CASE("checkpoint round trip and resume") {
  const auto& sp = small_split();
  const auto r = fit(sp.train, sp.validation, small_model(), quick(2));
  const std::string text = checkpoint_to_string(r.state);
  const auto back = checkpoint_from_string(text);
  CHECK(same_bits(back.model.params(), r.state.model.params()));
  CHECK(checkpoint_to_string(back) == text);
  CHECK(back.epochs_done == r.state.epochs_done);
  CHECK(back.model.tree().leaves().size() == r.state.model.tree().leaves().size());

  const auto p1 = r.state.model.predict(sp.test);
  const auto p2 = back.model.predict(sp.test);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].y_final == p2[i].y_final);

  std::vector<EpochRecord> seen;
  auto more = quick(1);
  const auto resumed = resume(back, sp.train, sp.validation, more, [&](const EpochRecord& e) { seen.push_back(e); });
  REQUIRE(!seen.empty());
  CHECK(seen.front().epoch == 0);
  CHECK(seen.front().val_mape == r.state.best_val_mape);
  CHECK(!resumed.diverged);

  CHECK_THROWS(checkpoint_from_string("{\"version\": 99}"));
  CHECK_THROWS(checkpoint_from_string("not json"));
}

TEST_CASE("count regression learns a constant label") {
  auto train = small_split().train;
  auto val = small_split().validation;
  for (auto* part : {&train, &val}) {
    for (auto& s : *part) {
      s.label = 10;
      s.tracked_conversions = std::min<std::int64_t>(s.tracked_conversions, 10);
    }
  }
  auto mc = small_model();
  mc.kind = ModelKind::kValueRegressionCount;
  auto t = quick(30);
  t.lr = 2e-2;
  t.patience = 30;
  const auto r = fit(train, val, mc, t);
  for (const auto& p : r.state.model.predict(val)) {
    CHECK(p.y_final >= 9.5);
    CHECK(p.y_final <= 10.5);
  }
}

TEST_CASE("a perfect PCOC oracle recovers every positive label") {
  GeneratorConfig g;
  g.n_samples = 20000;
  g.check_calibration = false;
  for (const auto& s : generate_campaigns(g)) {
    if (s.label > 0) CHECK(infer_yg(s.z, pcoc_label(s.z, s.label)) == static_cast<double>(s.label));
  }
}

TEST_CASE("prediction invariants") {
  const auto& sp = small_split();
  const auto r = fit(sp.train, sp.validation, small_model(), quick(2));
  for (const auto& s : sp.test) CHECK_NOTHROW(validate_sample(s));
  const auto preds = r.state.model.predict(sp.test);
  REQUIRE(preds.size() == sp.test.size());
  double lo = 1e300, hi = -1e300;
  for (int leaf : r.state.model.tree().leaves()) {
    lo = std::min(lo, r.state.model.tree().node(leaf).expectation);
    hi = std::max(hi, r.state.model.tree().node(leaf).expectation);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    CHECK(p.lambda >= 0.0);
    CHECK(p.lambda <= 1.0);
    CHECK(p.y_f >= lo - 1e-9);
    CHECK(p.y_f <= hi + 1e-9);
    CHECK(p.y_hat >= std::min(p.y_f, p.y_g) - 1e-9);
    CHECK(p.y_hat <= std::max(p.y_f, p.y_g) + 1e-9);
    CHECK(p.y_final >= static_cast<double>(sp.test[i].tracked_conversions));
    CHECK(p.y_final >= p.y_hat);
  }
}

TEST_CASE("divergence keeps the last good parameters") {
  const auto& sp = small_split();
  auto t = quick(3);
  t.lr = 1e200;
  const auto r = fit(sp.train, sp.validation, small_model(), t);
  CHECK(r.diverged);
  CHECK(!r.diagnostic.empty());
  for (double v : r.state.model.params()) CHECK(std::isfinite(v));
}
