#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lada/ndnum/matrix.hpp"

namespace lada {

enum class Activation { Identity, ReLU, Softmax };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;
  // Inverted dropout is applied to this layer's output in train mode.
  bool dropout = false;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct LayerSpec {
  std::size_t out = 0;
  Activation activation = Activation::Identity;
  bool dropout = false;
};

/// Everything backward() needs from a forward pass.
struct ActivationStack {
  std::vector<Matrix> inputs;  // input to layer i
  std::vector<Matrix> pre;     // pre-activation of layer i
  std::vector<Matrix> masks;   // scaled keep-mask of layer i, empty when unused
  Matrix output;
  bool train_mode = false;

  bool empty() const { return pre.empty(); }
};

struct LayerGrad {
  Matrix weight;
  Vector bias;
};

struct MlpGrads {
  std::vector<LayerGrad> layers;
  Matrix input;  // gradient w.r.t. the batch fed to forward()
};

/// Fully connected feed-forward network.
///
/// A Softmax activation may only appear on the last layer. For such heads,
/// backward() expects the gradient w.r.t. the logits (pre-softmax), which is
/// what every stable loss in losses.hpp produces; use softmax_backward() to
/// convert a gradient taken w.r.t. probabilities.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Glorot-uniform weights, zero biases.
  static Mlp make(std::size_t input_dim, std::span<const LayerSpec> specs, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// rng may be null when train_mode is false or dropout_p is zero.
  ActivationStack forward(const Matrix& batch, double dropout_p, Rng* rng, bool train_mode) const;

  /// Eval-mode forward returning only the output.
  Matrix predict(const Matrix& batch) const;

  MlpGrads backward(const ActivationStack& stack, const Matrix& grad_output) const;

  MlpGrads zero_grads() const;

 private:
  void validate() const;

  std::vector<Layer> layers_;
};

/// Order-sensitive FNV-1a hash of all parameter bytes.
std::uint64_t parameter_hash(const Mlp& mlp);

}  // namespace lada
