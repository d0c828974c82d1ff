#include "lada/ndnum/mlp.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "lada/error.hpp"

namespace lada {

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

void Mlp::validate() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (layer.bias.size() != layer.out_dim()) {
      throw Error(ErrorKind::Shape, "layer " + std::to_string(i) + ": bias length mismatch");
    }
    if (i > 0 && layer.in_dim() != layers_[i - 1].out_dim()) {
      throw Error(ErrorKind::Shape, "layer " + std::to_string(i) + ": input dim does not chain");
    }
    if (layer.activation == Activation::Softmax && i + 1 != layers_.size()) {
      throw Error(ErrorKind::Shape, "softmax is only permitted on the final layer");
    }
    if (layer.activation == Activation::Softmax && layer.dropout) {
      throw Error(ErrorKind::Shape, "dropout on a softmax head");
    }
  }
}

Mlp Mlp::make(std::size_t input_dim, std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<Layer> layers;
  layers.reserve(specs.size());
  std::size_t in = input_dim;
  for (const LayerSpec& spec : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + spec.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer;
    layer.weight.resize(static_cast<Eigen::Index>(spec.out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(spec.out));
    layer.activation = spec.activation;
    layer.dropout = spec.dropout;
    layers.push_back(std::move(layer));
    in = spec.out;
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().in_dim());
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().out_dim());
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

ActivationStack Mlp::forward(const Matrix& batch, double dropout_p, Rng* rng, bool train_mode) const {
  if (layers_.empty()) throw Error(ErrorKind::State, "forward on an empty network");
  if (batch.cols() != layers_.front().in_dim()) {
    throw Error(ErrorKind::Shape, "forward: batch has " + std::to_string(batch.cols()) +
                                      " columns, network expects " + std::to_string(input_dim()));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw Error(ErrorKind::Bounds, "dropout_p outside [0,1)");
  const bool use_dropout = train_mode && dropout_p > 0.0;
  if (use_dropout && rng == nullptr) throw Error(ErrorKind::State, "dropout requires an rng");

  ActivationStack stack;
  stack.train_mode = train_mode;
  stack.inputs.reserve(layers_.size());
  stack.pre.reserve(layers_.size());
  stack.masks.resize(layers_.size());

  Matrix current = batch;
  std::bernoulli_distribution keep(1.0 - dropout_p);
  const double scale = 1.0 / (1.0 - dropout_p);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    Matrix pre = current * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    Matrix post;
    switch (layer.activation) {
      case Activation::Identity: post = pre; break;
      case Activation::ReLU: post = pre.cwiseMax(0.0); break;
      case Activation::Softmax: post = softmax_rows(pre); break;
    }
    if (use_dropout && layer.dropout) {
      Matrix mask(post.rows(), post.cols());
      for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(*rng) ? scale : 0.0;
      post.array() *= mask.array();
      stack.masks[i] = std::move(mask);
    }
    stack.inputs.push_back(std::move(current));
    stack.pre.push_back(std::move(pre));
    current = std::move(post);
  }
  stack.output = std::move(current);
  return stack;
}

Matrix Mlp::predict(const Matrix& batch) const { return forward(batch, 0.0, nullptr, false).output; }

MlpGrads Mlp::backward(const ActivationStack& stack, const Matrix& grad_output) const {
  if (stack.empty() || stack.pre.size() != layers_.size()) {
    throw Error(ErrorKind::State, "backward: missing or foreign activation stack");
  }
  require_shape(grad_output, stack.output.rows(), stack.output.cols(), "backward grad_output");

  MlpGrads grads;
  grads.layers.resize(layers_.size());
  Matrix g = grad_output;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const Layer& layer = layers_[idx];
    if (stack.masks[idx].size() != 0) g.array() *= stack.masks[idx].array();
    if (layer.activation == Activation::ReLU) {
      g.array() *= (stack.pre[idx].array() > 0.0).cast<double>();
    }
    // Softmax heads receive logits gradients; identity passes through.
    grads.layers[idx].weight = g.transpose() * stack.inputs[idx];
    grads.layers[idx].bias = g.colwise().sum().transpose();
    g = g * layer.weight;
  }
  grads.input = std::move(g);
  return grads;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads grads;
  for (const Layer& layer : layers_) {
    grads.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                            Vector::Zero(layer.bias.size())});
  }
  return grads;
}

std::uint64_t parameter_hash(const Mlp& mlp) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const double* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Layer& layer : mlp.layers()) {
    feed(layer.weight.data(), layer.weight.size());
    feed(layer.bias.data(), layer.bias.size());
  }
  return h;
}

}  // namespace lada
