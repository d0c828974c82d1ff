#include "lada/ndnum/optimizer.hpp"

#include <cmath>
#include <string>

#include "lada/error.hpp"

namespace lada {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw Error(ErrorKind::Config, "unknown optimizer '" + std::string(name) + "' (expected adam|sgd)");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
}

void Optimizer::step(Mlp& mlp, const MlpGrads& grads) {
  auto& layers = mlp.layers();
  if (grads.layers.size() != layers.size()) throw Error(ErrorKind::Shape, "optimizer: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    require_shape(grads.layers[i].weight, layers[i].weight.rows(), layers[i].weight.cols(), "optimizer grad");
    if (grads.layers[i].bias.size() != layers[i].bias.size()) {
      throw Error(ErrorKind::Shape, "optimizer: bias gradient length mismatch");
    }
  }

  const double lr = settings_.learning_rate;
  if (settings_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight -= lr * grads.layers[i].weight;
      layers[i].bias -= lr * grads.layers[i].bias;
    }
    ++steps_;
    return;
  }

  if (m_.empty()) {
    m_ = mlp.zero_grads().layers;
    v_ = m_;
  } else if (m_.size() != layers.size()) {
    throw Error(ErrorKind::Shape, "optimizer: moment buffers bound to a different network");
  }
  ++steps_;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double eps = settings_.epsilon;
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, grads.layers[i].weight, m_[i].weight, v_[i].weight);
    update(layers[i].bias, grads.layers[i].bias, m_[i].bias, v_[i].bias);
  }
}

}  // namespace lada
