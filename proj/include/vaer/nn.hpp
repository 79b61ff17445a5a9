#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace vaer::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class Activation : std::uint32_t { identity = 0, relu = 1, softplus = 2, sigmoid = 3 };

/// Fully connected layer computing activation(W x + b).
/// Batches are row-major in the sense that each row is one sample.
struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static DenseLayer glorot(Eigen::Index in, Eigen::Index out, Activation activation, Rng& rng);
  /// Same shape and activation, all parameters zero. Used as a gradient buffer.
  static DenseLayer zeros_like(const DenseLayer& other);

  void set_zero();
};

/// Values kept from a forward pass that backward needs.
struct DenseCache {
  Matrix input;
  Matrix pre;
  Matrix output;
};

Matrix activate(Activation activation, const Matrix& pre);

/// Forward pass over a batch (one sample per row). Throws DimensionError
/// when input.cols() != layer.in_dim().
Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseCache* cache = nullptr);
Vector dense_forward(const DenseLayer& layer, const Vector& input);

/// Reverse pass: accumulates dL/dW and dL/db into `grads` and returns dL/dinput
/// (an empty matrix when `input_grad` is false).
Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& grad_output, DenseLayer& grads,
                      bool input_grad = true);

/// A plain stack of dense layers.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Matrix forward(const Matrix& input, std::vector<DenseCache>* caches = nullptr) const;
  Matrix backward(const std::vector<DenseCache>& caches, const Matrix& grad_output, Sequential& grads) const;
  Sequential zeros_like() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Flat views over every trainable array, in a fixed order. Gradient buffers
/// built with zeros_like() yield views in the same order.
using ParamViews = std::vector<std::span<double>>;

void append_params(DenseLayer& layer, ParamViews& out);
void append_params(Sequential& model, ParamViews& out);

bool all_finite(const DenseLayer& layer);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step to mirror the parameter shapes.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  void step(const ParamViews& params, const ParamViews& grads);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Stable log(1 + exp(x)).
double softplus(double x);
double sigmoid(double x);

}  // namespace vaer::nn
