#include "lada/ndnum/losses.hpp"

#include <string>

#include "lada/error.hpp"

namespace lada {

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw Error(ErrorKind::Shape, "cross-entropy: target count does not match rows");
  }
  const Matrix log_probs = log_softmax_rows(logits);
  LossGrad out;
  out.grad = log_probs.array().exp();
  const double inv_n = logits.rows() > 0 ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) {
      throw Error(ErrorKind::Bounds, "cross-entropy: target " + std::to_string(t) + " out of range");
    }
    out.loss -= log_probs(i, t);
    out.grad(i, t) -= 1.0;
  }
  out.loss *= inv_n;
  out.grad *= inv_n;
  return out;
}

LossGrad softmax_cross_entropy(const Matrix& logits, int target) {
  std::vector<int> targets(static_cast<std::size_t>(logits.rows()), target);
  return softmax_cross_entropy(logits, targets);
}

LossGrad softmax_cross_entropy_soft(const Matrix& logits, const Matrix& targets) {
  require_shape(targets, logits.rows(), logits.cols(), "soft cross-entropy targets");
  const Matrix log_probs = log_softmax_rows(logits);
  const double inv_n = logits.rows() > 0 ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  LossGrad out;
  out.loss = -(targets.array() * log_probs.array()).sum() * inv_n;
  // d/dz of -sum_k t_k log softmax_k = softmax * sum_k t_k - t
  const Vector mass = targets.rowwise().sum();
  out.grad = log_probs.array().exp();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out.grad.row(i) *= mass(i);
  out.grad -= targets;
  out.grad *= inv_n;
  return out;
}

LossGrad squared_error(const Matrix& pred, const Matrix& target) {
  require_shape(target, pred.rows(), pred.cols(), "squared_error target");
  const double inv_n = pred.rows() > 0 ? 1.0 / static_cast<double>(pred.rows()) : 0.0;
  LossGrad out;
  out.grad = (pred - target) * inv_n;
  out.loss = 0.5 * (pred - target).squaredNorm() * inv_n;
  return out;
}

}  // namespace lada
