#pragma once

#include <string_view>
#include <vector>

#include "lada/ndnum/mlp.hpp"

namespace lada {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Optimizer state bound to one network. Moment buffers are created lazily on
/// the first step and must shape-match the network from then on.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(OptimizerSettings settings);

  const OptimizerSettings& settings() const { return settings_; }
  long steps() const { return steps_; }

  /// SGD: p <- p - lr * g. Adam: bias-corrected moment update.
  void step(Mlp& mlp, const MlpGrads& grads);

  const std::vector<LayerGrad>& first_moments() const { return m_; }
  const std::vector<LayerGrad>& second_moments() const { return v_; }

 private:
  OptimizerSettings settings_;
  long steps_ = 0;
  std::vector<LayerGrad> m_;
  std::vector<LayerGrad> v_;
};

}  // namespace lada
