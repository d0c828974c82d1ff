#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lada/ndnum/matrix.hpp"

namespace lada {

/// Probability vector over K+1 classes; index K is the "unknown" class.
class ClassDistribution {
 public:
  ClassDistribution() = default;
  /// Validates non-negativity and unit mass (tolerance 1e-9).
  explicit ClassDistribution(std::vector<double> probs);

  static ClassDistribution uniform(std::size_t num_classes);
  /// Uniform over the first `known` classes, zero elsewhere.
  static ClassDistribution uniform_over(std::size_t known, std::size_t num_classes);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vector() const { return probs_; }

  /// Mixes in eps of mass on every class and renormalizes.
  ClassDistribution smoothed(double eps) const;

  bool operator==(const ClassDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

/// KL(p || q) in bits. Zero-mass terms of p contribute exactly zero.
/// Throws DivergenceUndefined if q_k = 0 < p_k for some k.
double kl_divergence(const ClassDistribution& p, const ClassDistribution& q);

/// Shannon entropy in bits.
double entropy(const ClassDistribution& p);

/// Normalized label counts. Absent classes get exactly zero.
ClassDistribution empirical_distribution(std::span<const int> labels, std::size_t num_classes);

/// Row-stochastic N x (K+1) matrix P with P = row-softmax(theta).
class RelaxedAssignment {
 public:
  static RelaxedAssignment from_logits(Matrix theta);
  /// theta = log P (rows of P must already be stochastic).
  static RelaxedAssignment from_probs(Matrix probs);

  const Matrix& probs() const { return probs_; }
  const Matrix& theta() const { return theta_; }
  Eigen::Index rows() const { return probs_.rows(); }
  Eigen::Index cols() const { return probs_.cols(); }

 private:
  RelaxedAssignment(Matrix theta, Matrix probs) : theta_(std::move(theta)), probs_(std::move(probs)) {}

  Matrix theta_;
  Matrix probs_;
};

/// Column means P_k of the assignment.
ClassDistribution relaxed_marginal(const RelaxedAssignment& a);

struct RelaxedEntropy {
  double value = 0.0;  // H(P) in bits
  Matrix grad_probs;   // dH/dP_ik
  Matrix grad_theta;   // dH/dtheta_ik through the row softmax
};

/// H(P) = -sum_k P_k log2 P_k with P_k the column means. Columns with P_k = 0
/// contribute nothing and receive zero gradient.
RelaxedEntropy relaxed_entropy(const RelaxedAssignment& a);

struct KlTargetOptions {
  double tol = 0.02;
  int max_retries = 64;
  double dirichlet_alpha = 0.1;
};

/// Finds p_t with |KL(p_t || p_s) - kappa| <= tol by bisecting along the
/// geometric path p_s^(1-l) * p_x^l towards a sparse Dirichlet proposal p_x.
/// Throws UnreachableTarget after max_retries proposals whose endpoint KL
/// stays below kappa.
ClassDistribution solve_kl_target(const ClassDistribution& p_s, double kappa, Rng& rng,
                                  const KlTargetOptions& options = {});

/// Largest-remainder rounding of `total * p` to integer counts summing to total.
std::vector<std::size_t> largest_remainder_counts(const ClassDistribution& p, std::size_t total);

struct SubsetOptions {
  double tol = 0.02;
  std::size_t min_total = 100;
  std::size_t max_total = 0;  // 0 = as large as the pool allows
  int max_retries = 32;
  KlTargetOptions solver{};
};

struct TargetSubset {
  std::vector<std::size_t> indices;  // ascending
  std::vector<std::size_t> counts;   // per class
  ClassDistribution realized;        // empirical class distribution of the subset
  ClassDistribution requested;       // solver output before quantization
  double achieved_ci = 0.0;          // KL(realized || p_s), bits
};

/// Draws a subset of a labeled pool whose class distribution sits at KL
/// distance kappa from p_s. Labels are used only to build the split.
/// Throws InsufficientPool naming the limiting class when the pool cannot
/// supply min_total instances in the required proportions.
TargetSubset sample_target_subset(std::span<const int> pool_labels, const ClassDistribution& p_s, double kappa,
                                  Rng& rng, const SubsetOptions& options = {});

}  // namespace lada
