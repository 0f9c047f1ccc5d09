#include "ldacp/nn.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ldacp::nn {

double selu(double x) {
  return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
}

double selu_derivative(double x) {
  return x >= 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kSelu: return "selu";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "selu") return Activation::kSelu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Block ParameterLayout::allocate(Eigen::Index rows, Eigen::Index cols) {
  Block b{size_, rows, cols};
  size_ += b.size();
  return b;
}

DenseNet::DenseNet(ParameterLayout& layout, Eigen::Index input_dim, std::span<const int> widths,
                   std::span<const Activation> activations)
    : input_dim_(input_dim) {
  if (widths.size() != activations.size()) {
    throw std::invalid_argument("DenseNet: widths and activations differ in length");
  }
  Eigen::Index in = input_dim;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] <= 0) throw std::invalid_argument("DenseNet: layer width must be positive");
    DenseLayer layer;
    layer.weight = layout.allocate(widths[k], in);
    layer.bias = layout.allocate(widths[k], 1);
    layer.activation = activations[k];
    layers_.push_back(layer);
    in = widths[k];
  }
}

Eigen::Index DenseNet::output_dim() const {
  return layers_.empty() ? input_dim_ : layers_.back().weight.rows;
}

void DenseNet::initialize(std::span<double> params, std::mt19937_64& rng) const {
  for (const auto& layer : layers_) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(layer.weight.cols)));
    auto w = view(params, layer.weight);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = normal(rng);
    view(params, layer.bias).setZero();
  }
}

namespace {

void apply_activation(Activation a, const Matrix& pre, Matrix& out) {
  switch (a) {
    case Activation::kLinear: out = pre; break;
    case Activation::kSelu: out = pre.unaryExpr([](double v) { return selu(v); }); break;
  }
}

}  // namespace

Matrix DenseNet::forward(std::span<const double> params, const Matrix& x, Cache* cache) const {
  if (x.rows() != input_dim_) {
    throw std::invalid_argument(
        fmt::format("DenseNet::forward: input has {} rows, expected {}", x.rows(), input_dim_));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix current = x;
  for (const auto& layer : layers_) {
    Matrix pre = view(params, layer.weight) * current;
    pre.colwise() += view(params, layer.bias).col(0);
    Matrix out;
    apply_activation(layer.activation, pre, out);
    if (cache) {
      cache->inputs.push_back(std::move(current));
      cache->pre_activations.push_back(std::move(pre));
    }
    current = std::move(out);
  }
  return current;
}

Matrix DenseNet::backward(std::span<const double> params, const Cache& cache, const Matrix& grad_out,
                          std::span<double> grads) const {
  Matrix delta = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix& pre = cache.pre_activations[k];
    if (layer.activation == Activation::kSelu) {
      delta.array() *= pre.unaryExpr([](double v) { return selu_derivative(v); }).array();
    }
    view(grads, layer.weight).noalias() += delta * cache.inputs[k].transpose();
    view(grads, layer.bias).col(0) += delta.rowwise().sum();
    Matrix next = view(params, layer.weight).transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

Vector dense_forward(const DenseNet& net, std::span<const double> params, const Vector& input) {
  if (input.size() != net.input_dim()) {
    throw std::invalid_argument(fmt::format("dense_forward: input length {} != input_dim {}",
                                            input.size(), net.input_dim()));
  }
  Matrix x = input;
  return net.forward(params, x).col(0);
}

EmbeddingTable::EmbeddingTable(ParameterLayout& layout, int vocab_size, int dim)
    : vocab_size_(vocab_size), dim_(dim) {
  if (vocab_size < 1 || dim < 1) throw std::invalid_argument("EmbeddingTable: empty table");
  block_ = layout.allocate(dim, vocab_size);
}

void EmbeddingTable::accumulate(std::span<double> grads, std::int64_t id,
                                const Eigen::Ref<const Vector>& g) const {
  Eigen::Map<Vector> row(grads.data() + block_.offset + static_cast<std::size_t>(row_of(id) * dim_), dim_);
  row += g;
}

void EmbeddingTable::initialize(std::span<double> params, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 0.01);
  auto m = view(params, block_);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
}

AdamState AdamState::for_size(std::size_t n, double lr) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.lr = lr;
  return s;
}

NonFiniteGradient::NonFiniteGradient(std::size_t index, double value)
    : std::runtime_error(fmt::format("non-finite gradient {} at parameter {}", value, index)),
      index_(index) {}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch between params, grads and state");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NonFiniteGradient(i, grads[i]);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

GradCheckReport grad_check(const Objective& objective, std::span<const double> params,
                           int probe_count, double fd_epsilon, std::uint64_t seed) {
  if (!(fd_epsilon >= 1e-7 && fd_epsilon <= 1e-3)) {
    throw std::invalid_argument("grad_check: fd_epsilon must lie in [1e-7, 1e-3]");
  }
  if (params.empty() || probe_count <= 0) return {};

  std::vector<double> x(params.begin(), params.end());
  std::vector<double> analytic(x.size(), 0.0);
  objective.gradient(x, analytic);

  const bool kink_aware = static_cast<bool>(objective.branch_signature);
  const std::uint64_t base_signature = kink_aware ? objective.branch_signature(x) : 0;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  GradCheckReport report;
  const int max_attempts = 50 * probe_count;
  for (int attempt = 0; attempt < max_attempts && report.probes < probe_count; ++attempt) {
    const std::size_t i = pick(rng);
    const double original = x[i];
    x[i] = original + fd_epsilon;
    const double plus = objective.value(x);
    const std::uint64_t sig_plus = kink_aware ? objective.branch_signature(x) : 0;
    x[i] = original - fd_epsilon;
    const double minus = objective.value(x);
    const std::uint64_t sig_minus = kink_aware ? objective.branch_signature(x) : 0;
    x[i] = original;
    if (kink_aware && (sig_plus != base_signature || sig_minus != base_signature)) {
      ++report.skipped_at_kinks;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * fd_epsilon);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.probes;
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace ldacp::nn
