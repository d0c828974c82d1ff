#pragma once

#include <span>

#include "lada/ndnum/matrix.hpp"

namespace lada {

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // w.r.t. the logits
};

/// Mean cross-entropy of row-softmax(logits) against integer targets, in nats.
/// The gradient is w.r.t. the logits and already divided by the row count.
LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> targets);

/// Same loss with every row sharing one target.
LossGrad softmax_cross_entropy(const Matrix& logits, int target);

/// Cross-entropy against soft targets (each row a distribution).
LossGrad softmax_cross_entropy_soft(const Matrix& logits, const Matrix& targets);

/// Mean squared error 0.5 * mean_rows ||pred - target||^2.
LossGrad squared_error(const Matrix& pred, const Matrix& target);

}  // namespace lada
