#pragma once

// Minimal dense network engine: flat parameter storage, affine layers with
// SELU, embedding tables, Adam and a central-difference gradient checker.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ldacp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;

double selu(double x);
// Derivative of selu; at x == 0 the right-hand slope is used.
double selu_derivative(double x);
double sigmoid(double x);
double softplus(double x);

enum class Activation { kLinear, kSelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// A rows x cols column-major block inside a flat parameter vector.
struct Block {
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

class ParameterLayout {
 public:
  Block allocate(Eigen::Index rows, Eigen::Index cols);
  std::size_t size() const { return size_; }

 private:
  std::size_t size_ = 0;
};

inline Eigen::Map<Matrix> view(std::span<double> storage, const Block& b) {
  return {storage.data() + b.offset, b.rows, b.cols};
}
inline Eigen::Map<const Matrix> view(std::span<const double> storage, const Block& b) {
  return {storage.data() + b.offset, b.rows, b.cols};
}

struct DenseLayer {
  Block weight;  // out x in
  Block bias;    // out x 1
  Activation activation = Activation::kLinear;
};

class DenseNet {
 public:
  struct Cache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre_activations;
  };

  DenseNet() = default;
  // One layer per entry of `widths`; `activations` must have the same length.
  DenseNet(ParameterLayout& layout, Eigen::Index input_dim, std::span<const int> widths,
           std::span<const Activation> activations);

  Eigen::Index input_dim() const { return input_dim_; }
  Eigen::Index output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }

  // LeCun-normal weights (variance 1/fan_in), zero biases.
  void initialize(std::span<double> params, std::mt19937_64& rng) const;

  // x is input_dim x batch. Throws std::invalid_argument on a dimension mismatch.
  Matrix forward(std::span<const double> params, const Matrix& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients into `grads` and returns d(loss)/d(input).
  Matrix backward(std::span<const double> params, const Cache& cache, const Matrix& grad_out,
                  std::span<double> grads) const;

 private:
  Eigen::Index input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

Vector dense_forward(const DenseNet& net, std::span<const double> params, const Vector& input);

// Embedding vectors are stored as the columns of a dim x vocab block. Id 0 is
// reserved for unknown values; ids >= vocab_size also map to it.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(ParameterLayout& layout, int vocab_size, int dim = 8);

  int vocab_size() const { return vocab_size_; }
  int dim() const { return dim_; }
  const Block& block() const { return block_; }

  int row_of(std::int64_t id) const {
    return (id <= 0 || id >= vocab_size_) ? 0 : static_cast<int>(id);
  }
  Eigen::Map<const Vector> lookup(std::span<const double> params, std::int64_t id) const {
    return {params.data() + block_.offset + static_cast<std::size_t>(row_of(id) * dim_), dim_};
  }
  void accumulate(std::span<double> grads, std::int64_t id, const Eigen::Ref<const Vector>& g) const;

  // Rows ~ N(0, 0.01).
  void initialize(std::span<double> params, std::mt19937_64& rng) const;

 private:
  int vocab_size_ = 0;
  int dim_ = 0;
  Block block_;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(std::size_t n, double lr = 1e-3);
};

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t index, double value);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Bias-corrected Adam update. Throws NonFiniteGradient before touching any
// parameter if a gradient entry is NaN or infinite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

struct Objective {
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  // Optional. Identifies the active branch of every piecewise function; a
  // probe whose +/- eps evaluations change the signature straddles a kink and
  // is replaced by another coordinate.
  std::function<std::uint64_t(std::span<const double>)> branch_signature;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  int probes = 0;
  int skipped_at_kinks = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;

GradCheckReport grad_check(const Objective& objective, std::span<const double> params,
                           int probe_count, double fd_epsilon, std::uint64_t seed);

}  // namespace ldacp::nn
