#include "vaer/nn.hpp"

#include <cmath>
#include <string>

#include "vaer/error.hpp"

namespace vaer::nn {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseLayer DenseLayer::glorot(Eigen::Index in, Eigen::Index out, Activation activation, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer;
  layer.weights.resize(out, in);
  // fill row by row so the draw order does not depend on Eigen's storage order
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
  layer.bias = Vector::Zero(out);
  layer.activation = activation;
  return layer;
}

DenseLayer DenseLayer::zeros_like(const DenseLayer& other) {
  DenseLayer layer;
  layer.weights = Matrix::Zero(other.weights.rows(), other.weights.cols());
  layer.bias = Vector::Zero(other.bias.size());
  layer.activation = other.activation;
  return layer;
}

void DenseLayer::set_zero() {
  weights.setZero();
  bias.setZero();
}

Matrix activate(Activation activation, const Matrix& pre) {
  switch (activation) {
    case Activation::identity:
      return pre;
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::softplus:
      return pre.unaryExpr([](double x) { return softplus(x); });
    case Activation::sigmoid:
      return pre.unaryExpr([](double x) { return sigmoid(x); });
  }
  return pre;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseCache* cache) {
  if (input.cols() != layer.in_dim()) {
    throw DimensionError("dense layer expects " + std::to_string(layer.in_dim()) + " inputs, got " +
                         std::to_string(input.cols()));
  }
  Matrix pre = input * layer.weights.transpose();
  pre.rowwise() += layer.bias.transpose();
  Matrix out = activate(layer.activation, pre);
  if (cache) {
    cache->input = input;
    cache->pre = std::move(pre);
    cache->output = out;
  }
  return out;
}

Vector dense_forward(const DenseLayer& layer, const Vector& input) {
  Matrix row = input.transpose();
  return dense_forward(layer, row).row(0).transpose();
}

Matrix dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& grad_output, DenseLayer& grads,
                      bool input_grad) {
  Matrix grad_pre;
  switch (layer.activation) {
    case Activation::identity:
      grad_pre = grad_output;
      break;
    case Activation::relu:
      grad_pre = grad_output.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
      break;
    case Activation::softplus:
      grad_pre = grad_output.cwiseProduct(cache.pre.unaryExpr([](double x) { return sigmoid(x); }));
      break;
    case Activation::sigmoid:
      grad_pre = grad_output.array() * cache.output.array() * (1.0 - cache.output.array());
      break;
  }
  grads.weights.noalias() += grad_pre.transpose() * cache.input;
  grads.bias += grad_pre.colwise().sum().transpose();
  if (!input_grad) return {};
  return grad_pre * layer.weights;
}

Matrix Sequential::forward(const Matrix& input, std::vector<DenseCache>* caches) const {
  if (caches) caches->assign(layers_.size(), DenseCache{});
  Matrix x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) x = dense_forward(layers_[i], x, caches ? &(*caches)[i] : nullptr);
  return x;
}

Matrix Sequential::backward(const std::vector<DenseCache>& caches, const Matrix& grad_output, Sequential& grads) const {
  Matrix g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) g = dense_backward(layers_[i], caches[i], g, grads.layers_[i]);
  return g;
}

Sequential Sequential::zeros_like() const {
  std::vector<DenseLayer> layers;
  layers.reserve(layers_.size());
  for (const DenseLayer& l : layers_) layers.push_back(DenseLayer::zeros_like(l));
  return Sequential(std::move(layers));
}

void append_params(DenseLayer& layer, ParamViews& out) {
  out.emplace_back(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
  out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
}

void append_params(Sequential& model, ParamViews& out) {
  for (DenseLayer& l : model.layers()) append_params(l, out);
}

bool all_finite(const DenseLayer& layer) { return layer.weights.allFinite() && layer.bias.allFinite(); }

void AdamState::step(const ParamViews& params, const ParamViews& grads) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count mismatch");
  if (first_.empty()) {
    first_.resize(params.size());
    second_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i].assign(params[i].size(), 0.0);
      second_[i].assign(params[i].size(), 0.0);
    }
  }
  if (first_.size() != params.size()) throw DimensionError("adam: parameter set changed between steps");

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto p = params[i];
    const auto g = grads[i];
    if (p.size() != g.size() || p.size() != first_[i].size()) throw DimensionError("adam: shape mismatch");
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace vaer::nn
