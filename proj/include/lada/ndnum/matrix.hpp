#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace lada {

/// Dense row-major 64-bit matrix. Rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// The single random engine type used everywhere; all streams are seeded
/// explicitly by the caller.
using Rng = std::mt19937_64;

/// Throws ErrorKind::Numeric if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

/// Throws ErrorKind::Shape unless m is rows x cols.
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what);

/// Numerically stable row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

/// Row-wise log-softmax, log-sum-exp shifted.
Matrix log_softmax_rows(const Matrix& logits);

/// Backpropagates a gradient taken w.r.t. softmax probabilities to the logits.
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs);

/// Index of the largest entry in each row (first one on ties).
std::vector<int> argmax_rows(const Matrix& m);

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace lada
