#include "ldacp/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "ldacp/bcms.hpp"
#include "ldacp/vrmp.hpp"

namespace ldacp {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLdacp: return "ldacp";
    case ModelKind::kValueRegressionCount: return "vr-n";
    case ModelKind::kValueRegressionPcoc: return "vr-p";
  }
  return "ldacp";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ldacp") return ModelKind::kLdacp;
  if (s == "vr-n") return ModelKind::kValueRegressionCount;
  if (s == "vr-p") return ModelKind::kValueRegressionPcoc;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::string to_string(LabelMode m) { return m == LabelMode::kSoft ? "soft" : "hard"; }

LabelMode label_mode_from_string(const std::string& s) {
  if (s == "soft") return LabelMode::kSoft;
  if (s == "hard") return LabelMode::kHard;
  throw std::invalid_argument("unknown label mode '" + s + "'");
}

void ModelConfig::validate() const {
  if (embedding_dim < 1) throw std::invalid_argument("model: embedding_dim must be >= 1");
  if (trunk_widths.empty()) throw std::invalid_argument("model: trunk needs at least one layer");
  for (int w : trunk_widths) {
    if (w < 1) throw std::invalid_argument("model: trunk widths must be >= 1");
  }
  if (num_leaves < 2) throw std::invalid_argument("model: num_leaves must be >= 2");
  kernel.validate();
  if (n_products < 1 || n_objectives < 1) throw std::invalid_argument("model: vocabulary sizes must be >= 1");
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const CampaignSample> samples) {
  if (samples.empty()) throw std::invalid_argument("FeatureNormalizer::fit: no samples");
  FeatureNormalizer n;
  std::array<double, kDenseFeatureCount> sq{};
  for (const auto& s : samples) {
    const auto f = dense_features(s);
    for (int k = 0; k < kDenseFeatureCount; ++k) {
      n.mean[k] += f[k];
      sq[k] += f[k] * f[k];
    }
  }
  const double count = static_cast<double>(samples.size());
  for (int k = 0; k < kDenseFeatureCount; ++k) {
    n.mean[k] /= count;
    const double var = std::max(0.0, sq[k] / count - n.mean[k] * n.mean[k]);
    const double sd = std::sqrt(var);
    n.scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

namespace {

constexpr int kSparseFeatures = 4;

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

struct Hasher {
  std::uint64_t h = 1469598103934665603ull;
  void add(std::uint64_t bits) {
    h ^= bits;
    h *= 1099511628211ull;
  }
};

int pcoc_region(double raw) {
  const double s = nn::softplus(raw);
  return s < kPcocMin ? 0 : (s > kPcocMax ? 2 : 1);
}

// Neumaier-compensated running sum; batch losses add up thousands of terms.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::span<double> column(nn::Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

std::span<const double> column(const nn::Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

struct Model::Forward {
  nn::Matrix x;
  nn::Matrix hidden;
  nn::DenseNet::Cache trunk_cache;
  nn::DenseNet::Cache edge_cache;
  nn::DenseNet::Cache pcoc_cache;
  nn::DenseNet::Cache gate_cache;
  nn::Matrix edge_logits;
  nn::Matrix pcoc_raw;
  nn::Matrix gate_raw;
};

Eigen::Index Model::input_dim() const {
  return static_cast<Eigen::Index>(kSparseFeatures * config_.embedding_dim + kDenseFeatureCount);
}

void Model::build_layout() {
  nn::ParameterLayout layout;
  const int dim = config_.embedding_dim;
  industry_emb_ = nn::EmbeddingTable(layout, kNumIndustries + 1, dim);
  product_emb_ = nn::EmbeddingTable(layout, config_.n_products + 1, dim);
  objective_emb_ = nn::EmbeddingTable(layout, config_.n_objectives + 1, dim);
  type_emb_ = nn::EmbeddingTable(layout, kNumCampaignTypes + 1, dim);

  std::vector<nn::Activation> acts(config_.trunk_widths.size(), nn::Activation::kSelu);
  trunk_ = nn::DenseNet(layout, input_dim(), config_.trunk_widths, acts);
  const Eigen::Index h = trunk_.output_dim();
  const std::vector<nn::Activation> linear{nn::Activation::kLinear};
  if (config_.kind == ModelKind::kLdacp) {
    const int edges = 2 * static_cast<int>(tree_.non_leaves().size());
    if (edges == 0) throw std::invalid_argument("model: bucket tree has no split (single label value)");
    edge_head_ = nn::DenseNet(layout, h, std::vector<int>{edges}, linear);
  }
  pcoc_head_ = nn::DenseNet(layout, h, std::vector<int>{1}, linear);
  if (config_.kind == ModelKind::kLdacp) gate_head_ = nn::DenseNet(layout, h, std::vector<int>{1}, linear);
  params_.assign(layout.size(), 0.0);
}

Model Model::create(const ModelConfig& config, std::span<const CampaignSample> train, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("Model::create: empty training set");
  Model m;
  m.config_ = config;
  const auto labels = labels_of(train);
  if (config.kind == ModelKind::kLdacp) m.tree_ = BucketTree::build(labels, config.num_leaves, config.leaf_mode);
  m.normalizer_ = FeatureNormalizer::fit(train);
  m.build_layout();

  std::mt19937_64 rng(seed);
  for (const auto* emb : {&m.industry_emb_, &m.product_emb_, &m.objective_emb_, &m.type_emb_}) {
    emb->initialize(m.params_, rng);
  }
  m.trunk_.initialize(m.params_, rng);
  if (!m.edge_head_.empty()) m.edge_head_.initialize(m.params_, rng);
  m.pcoc_head_.initialize(m.params_, rng);
  if (!m.gate_head_.empty()) m.gate_head_.initialize(m.params_, rng);

  // Start the scalar head at the training median of its target.
  double start = 0.0;
  if (config.kind == ModelKind::kValueRegressionCount) {
    std::vector<double> y(labels.begin(), labels.end());
    start = median(y);
  } else {
    std::vector<double> pcoc;
    for (const auto& s : train) pcoc.push_back(static_cast<double>(pcoc_label(s.z, s.label)));
    start = inverse_softplus(std::clamp(median(pcoc), kPcocMin, kPcocMax));
  }
  nn::view(std::span<double>(m.params_), m.pcoc_head_.layers().front().bias)(0, 0) = start;

  // Edge logits start at the log-odds of the mean training target per side.
  if (!m.edge_head_.empty()) {
    const std::size_t slots = m.tree_.non_leaves().size();
    std::vector<double> sum(2 * slots, 0.0);
    std::vector<double> count(slots, 0.0);
    for (const auto& set : m.targets(train)) {
      for (const auto& t : set) {
        const auto slot = static_cast<std::size_t>(m.tree_.node(t.node).head_slot);
        sum[2 * slot] += t.p_left;
        sum[2 * slot + 1] += t.p_right;
        count[slot] += 1.0;
      }
    }
    auto bias = nn::view(std::span<double>(m.params_), m.edge_head_.layers().front().bias);
    for (std::size_t k = 0; k < 2 * slots; ++k) {
      const double p = count[k / 2] > 0.0 ? std::clamp(sum[k] / count[k / 2], 1e-4, 1.0 - 1e-4) : 0.5;
      bias(static_cast<Eigen::Index>(k), 0) = std::log(p / (1.0 - p));
    }
  }
  return m;
}

Model Model::assemble(const ModelConfig& config, const FeatureNormalizer& normalizer, BucketTree tree,
                      std::vector<double> params) {
  config.validate();
  Model m;
  m.config_ = config;
  m.normalizer_ = normalizer;
  m.tree_ = std::move(tree);
  m.build_layout();
  if (params.size() != m.params_.size()) {
    throw std::invalid_argument(fmt::format("Model::assemble: {} parameters supplied, layout needs {}",
                                            params.size(), m.params_.size()));
  }
  m.params_ = std::move(params);
  return m;
}

std::vector<SoftLabelSet> Model::targets(std::span<const CampaignSample> samples) const {
  std::vector<SoftLabelSet> out;
  if (config_.kind != ModelKind::kLdacp) {
    out.resize(samples.size());
    return out;
  }
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const double y = static_cast<double>(s.label);
    out.push_back(config_.label_mode == LabelMode::kSoft ? soft_labels(tree_, y, config_.kernel)
                                                         : hard_labels(tree_, y));
  }
  return out;
}

nn::Matrix Model::encode(std::span<const double> params, std::span<const CampaignSample> batch) const {
  const int dim = config_.embedding_dim;
  nn::Matrix x(input_dim(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& s = batch[j];
    const auto col = static_cast<Eigen::Index>(j);
    x.col(col).segment(0, dim) = industry_emb_.lookup(params, index_of(s.industry) + 1);
    x.col(col).segment(dim, dim) = product_emb_.lookup(params, s.product_id);
    x.col(col).segment(2 * dim, dim) = objective_emb_.lookup(params, s.objective_id + 1);
    x.col(col).segment(3 * dim, dim) = type_emb_.lookup(params, index_of(s.campaign_type) + 1);
    const auto f = dense_features(s);
    for (int k = 0; k < kDenseFeatureCount; ++k) {
      x(kSparseFeatures * dim + k, col) = (f[k] - normalizer_.mean[k]) / normalizer_.scale[k];
    }
  }
  return x;
}

Model::Forward Model::run(std::span<const double> params, std::span<const CampaignSample> batch,
                          bool keep_cache) const {
  if (params.size() != params_.size()) throw std::invalid_argument("Model: parameter vector has wrong size");
  Forward f;
  f.x = encode(params, batch);
  f.hidden = trunk_.forward(params, f.x, keep_cache ? &f.trunk_cache : nullptr);
  if (!edge_head_.empty()) f.edge_logits = edge_head_.forward(params, f.hidden, keep_cache ? &f.edge_cache : nullptr);
  f.pcoc_raw = pcoc_head_.forward(params, f.hidden, keep_cache ? &f.pcoc_cache : nullptr);
  if (!gate_head_.empty()) f.gate_raw = gate_head_.forward(params, f.hidden, keep_cache ? &f.gate_cache : nullptr);
  return f;
}

LossBreakdown Model::loss(std::span<const double> params, std::span<const CampaignSample> batch,
                          std::span<const SoftLabelSet> targets, const LossWeights& w, std::span<double> grads,
                          std::uint64_t* signature) const {
  if (batch.empty()) throw std::invalid_argument("Model::loss: empty batch");
  const bool ldacp = config_.kind == ModelKind::kLdacp;
  if (ldacp && targets.size() != batch.size()) {
    throw std::invalid_argument("Model::loss: one target set per sample is required");
  }
  const bool want_grad = !grads.empty();
  if (want_grad && grads.size() != params.size()) throw std::invalid_argument("Model::loss: gradient size mismatch");

  Forward f = run(params, batch, want_grad || signature);
  const bool frozen = !w.joint_moe && !w.frozen_experts.empty();
  Forward experts;
  if (frozen && config_.use_vrmp && ldacp) {
    experts = run(w.frozen_experts, batch, false);
    f.gate_raw = gate_head_.forward(params, experts.hidden, want_grad ? &f.gate_cache : nullptr);
  }
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  nn::Matrix d_edge = nn::Matrix::Zero(f.edge_logits.rows(), n);
  nn::Matrix d_pcoc = nn::Matrix::Zero(1, n);
  nn::Matrix d_gate = nn::Matrix::Zero(f.gate_raw.rows(), n);
  Hasher hash;
  LossBreakdown out;
  CompensatedSum bcms_sum, vrmp_sum, moe_sum;

  for (Eigen::Index j = 0; j < n; ++j) {
    const CampaignSample& s = batch[static_cast<std::size_t>(j)];
    const double y = static_cast<double>(s.label);
    const double raw = f.pcoc_raw(0, j);

    if (config_.kind == ModelKind::kValueRegressionCount) {
      vrmp_sum.add(std::abs(raw - y));
      d_pcoc(0, j) = inv_n * sign(raw - y);
      hash.add(raw > y);
      continue;
    }
    const auto pcoc = static_cast<double>(pcoc_label(s.z, s.label));
    const double pcoc_hat = predict_pcoc(raw);
    if (config_.kind == ModelKind::kValueRegressionPcoc) {
      vrmp_sum.add(vrmp_loss(pcoc_hat, pcoc));
      d_pcoc(0, j) = inv_n * sign(pcoc_hat - pcoc) * predict_pcoc_derivative(raw);
      hash.add(static_cast<std::uint64_t>(pcoc_region(raw)) * 2 + (pcoc_hat > pcoc));
      continue;
    }

    const auto pairs = edge_probabilities(column(f.edge_logits, j));
    const auto& soft = targets[static_cast<std::size_t>(j)];
    bcms_sum.add(want_grad ? bcms_loss_backward(tree_, soft, pairs, inv_n, column(d_edge, j))
                           : bcms_loss(tree_, soft, pairs));
    if (!config_.use_vrmp) continue;

    vrmp_sum.add(vrmp_loss(pcoc_hat, pcoc));
    const double dpcoc_draw = predict_pcoc_derivative(raw);
    d_pcoc(0, j) += w.alpha * inv_n * sign(pcoc_hat - pcoc) * dpcoc_draw;

    double y_f = 0.0;
    double y_g = 0.0;
    if (frozen) {
      y_f = infer_yf(tree_, edge_probabilities(column(experts.edge_logits, j))).y_f;
      y_g = infer_yg(s.z, predict_pcoc(experts.pcoc_raw(0, j)));
    } else {
      y_f = infer_yf(tree_, pairs).y_f;
      y_g = infer_yg(s.z, pcoc_hat);
    }
    const double lambda = gate(f.gate_raw(0, j));
    moe_sum.add(moe_loss(lambda, y_f, y_g, y, w.eps_y));
    const MoeGradient g = moe_loss_gradient(lambda, y_f, y_g, y, w.eps_y);
    d_gate(0, j) = w.beta * inv_n * g.lambda * lambda * (1.0 - lambda);
    if (w.joint_moe) {
      if (want_grad) infer_yf_backward(tree_, pairs, w.beta * inv_n * g.y_f, column(d_edge, j));
      d_pcoc(0, j) += w.beta * inv_n * g.y_g * (-s.z / (pcoc_hat * pcoc_hat)) * dpcoc_draw;
    }
    const double residual = combine(lambda, y_f, y_g) - y;
    hash.add(static_cast<std::uint64_t>(pcoc_region(raw)) * 4 + (pcoc_hat > pcoc) * 2 + (residual > 0.0));
  }

  out.bcms = bcms_sum.value() * inv_n;
  out.vrmp = vrmp_sum.value() * inv_n;
  out.moe = moe_sum.value() * inv_n;
  switch (config_.kind) {
    case ModelKind::kLdacp:
      out.total = config_.use_vrmp ? total_loss(out.bcms, out.vrmp, out.moe, w.alpha, w.beta) : out.bcms;
      break;
    default: out.total = out.vrmp; break;
  }

  if (signature) {
    for (const auto& pre : f.trunk_cache.pre_activations) {
      for (Eigen::Index k = 0; k < pre.size(); ++k) hash.add(pre.data()[k] >= 0.0);
    }
    *signature = hash.h;
  }
  if (!want_grad) return out;

  nn::Matrix d_hidden = pcoc_head_.backward(params, f.pcoc_cache, d_pcoc, grads);
  if (!edge_head_.empty()) d_hidden += edge_head_.backward(params, f.edge_cache, d_edge, grads);
  if (!gate_head_.empty()) {
    // gate-only: the gate reads the trunk output as a constant
    const nn::Matrix d_gate_in = gate_head_.backward(params, f.gate_cache, d_gate, grads);
    if (w.joint_moe) d_hidden += d_gate_in;
  }
  const nn::Matrix dx = trunk_.backward(params, f.trunk_cache, d_hidden, grads);
  const int dim = config_.embedding_dim;
  for (Eigen::Index j = 0; j < n; ++j) {
    const CampaignSample& s = batch[static_cast<std::size_t>(j)];
    industry_emb_.accumulate(grads, index_of(s.industry) + 1, dx.col(j).segment(0, dim));
    product_emb_.accumulate(grads, s.product_id, dx.col(j).segment(dim, dim));
    objective_emb_.accumulate(grads, s.objective_id + 1, dx.col(j).segment(2 * dim, dim));
    type_emb_.accumulate(grads, index_of(s.campaign_type) + 1, dx.col(j).segment(3 * dim, dim));
  }
  return out;
}

std::vector<FusionOutput> Model::predict(std::span<const CampaignSample> samples) const {
  return predict(params_, samples);
}

std::vector<FusionOutput> Model::predict(std::span<const double> params,
                                         std::span<const CampaignSample> samples) const {
  std::vector<FusionOutput> out;
  out.reserve(samples.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const auto chunk = samples.subspan(begin, std::min(kChunk, samples.size() - begin));
    const Forward f = run(params, chunk, false);
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const CampaignSample& s = chunk[j];
      FusionOutput o;
      const double raw = f.pcoc_raw(0, col);
      switch (config_.kind) {
        case ModelKind::kValueRegressionCount:
          o.lambda = 0.0;
          o.y_g = std::max(raw, 0.0);
          o.y_hat = o.y_g;
          break;
        case ModelKind::kValueRegressionPcoc:
          o.lambda = 0.0;
          o.y_g = infer_yg(s.z, predict_pcoc(raw));
          o.y_hat = o.y_g;
          break;
        case ModelKind::kLdacp: {
          const auto pairs = edge_probabilities(column(f.edge_logits, col));
          o.y_f = infer_yf(tree_, pairs).y_f;
          if (config_.use_vrmp) {
            o.y_g = infer_yg(s.z, predict_pcoc(raw));
            o.lambda = gate(f.gate_raw(0, col));
            o.y_hat = combine(o.lambda, o.y_f, o.y_g);
          } else {
            o.lambda = 1.0;
            o.y_hat = o.y_f;
          }
          break;
        }
      }
      o.y_final = clamp_prediction(o.y_hat, s.tracked_conversions);
      out.push_back(o);
    }
  }
  return out;
}

}  // namespace ldacp
