#include "lada/classdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "lada/error.hpp"

namespace lada {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kLogFloor = -690.0;  // ~log(1e-300)

}  // namespace

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorKind::EmptyInput, "class distribution with no classes");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::Numeric, "class distribution entry must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw Error(ErrorKind::Numeric, "class distribution sums to " + std::to_string(total));
  }
}

ClassDistribution ClassDistribution::uniform(std::size_t num_classes) {
  return uniform_over(num_classes, num_classes);
}

ClassDistribution ClassDistribution::uniform_over(std::size_t known, std::size_t num_classes) {
  if (known == 0 || known > num_classes) throw Error(ErrorKind::Bounds, "uniform_over: bad class count");
  std::vector<double> p(num_classes, 0.0);
  std::fill_n(p.begin(), known, 1.0 / static_cast<double>(known));
  return ClassDistribution(std::move(p));
}

ClassDistribution ClassDistribution::smoothed(double eps) const {
  std::vector<double> p = probs_;
  const double norm = 1.0 + eps * static_cast<double>(p.size());
  for (double& v : p) v = (v + eps) / norm;
  return ClassDistribution(std::move(p));
}

double kl_divergence(const ClassDistribution& p, const ClassDistribution& q) {
  if (p.size() != q.size()) throw Error(ErrorKind::Shape, "kl_divergence: class count mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) {
      throw Error(ErrorKind::DivergenceUndefined,
                  "kl_divergence: class " + std::to_string(k) + " has mass in p but not in q");
    }
    sum += p[k] * std::log2(p[k] / q[k]);
  }
  return std::max(0.0, sum);
}

double entropy(const ClassDistribution& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return std::max(0.0, h);
}

ClassDistribution empirical_distribution(std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw Error(ErrorKind::EmptyInput, "empirical_distribution: no labels");
  std::vector<double> counts(num_classes, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw Error(ErrorKind::Bounds, "label " + std::to_string(y) + " outside [0, " +
                                         std::to_string(num_classes) + ")");
    }
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  for (double& c : counts) c /= n;
  return ClassDistribution(std::move(counts));
}

RelaxedAssignment RelaxedAssignment::from_logits(Matrix theta) {
  require_finite(theta, "relaxed assignment logits");
  Matrix probs = softmax_rows(theta);
  return RelaxedAssignment(std::move(theta), std::move(probs));
}

RelaxedAssignment RelaxedAssignment::from_probs(Matrix probs) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if ((probs.row(i).array() < 0.0).any() || std::abs(probs.row(i).sum() - 1.0) > kMassTolerance) {
      throw Error(ErrorKind::Numeric, "relaxed assignment row " + std::to_string(i) + " is not stochastic");
    }
  }
  Matrix theta = probs.array().max(std::numeric_limits<double>::min()).log();
  return RelaxedAssignment(std::move(theta), std::move(probs));
}

ClassDistribution relaxed_marginal(const RelaxedAssignment& a) {
  if (a.rows() == 0) throw Error(ErrorKind::EmptyInput, "relaxed_marginal: empty assignment");
  const Eigen::RowVectorXd means = a.probs().colwise().mean();
  std::vector<double> p(means.data(), means.data() + means.size());
  // Column means of stochastic rows drift from unit mass only by rounding.
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return ClassDistribution(std::move(p));
}

RelaxedEntropy relaxed_entropy(const RelaxedAssignment& a) {
  if (a.rows() == 0) throw Error(ErrorKind::EmptyInput, "relaxed_entropy: empty assignment");
  const Matrix& P = a.probs();
  const double n = static_cast<double>(P.rows());
  const Eigen::RowVectorXd marginal = P.colwise().sum() / n;

  RelaxedEntropy out;
  Eigen::RowVectorXd d_marginal = Eigen::RowVectorXd::Zero(P.cols());
  for (Eigen::Index k = 0; k < P.cols(); ++k) {
    const double pk = marginal(k);
    if (pk > 0.0) {
      out.value -= pk * std::log2(pk);
      d_marginal(k) = -(std::log2(pk) + 1.0 / std::log(2.0));
    }
  }
  out.grad_probs = (Matrix::Ones(P.rows(), 1) * d_marginal) / n;
  out.grad_theta = softmax_backward(P, out.grad_probs);
  return out;
}

namespace {

// p(l)_k ∝ exp((1-l) log p_s,k + l log p_x,k) restricted to the support.
ClassDistribution path_point(const std::vector<double>& log_ps, const std::vector<double>& log_px,
                             const std::vector<std::size_t>& support, std::size_t num_classes, double lambda) {
  std::vector<double> logits(support.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < support.size(); ++j) {
    logits[j] = (1.0 - lambda) * log_ps[j] + lambda * log_px[j];
    shift = std::max(shift, logits[j]);
  }
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - shift);
    total += v;
  }
  std::vector<double> p(num_classes, 0.0);
  for (std::size_t j = 0; j < support.size(); ++j) p[support[j]] = logits[j] / total;
  return ClassDistribution(std::move(p));
}

}  // namespace

ClassDistribution solve_kl_target(const ClassDistribution& p_s, double kappa, Rng& rng,
                                  const KlTargetOptions& options) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error(ErrorKind::Bounds, "kappa must be finite and >= 0");
  if (kappa == 0.0) return p_s;

  std::vector<std::size_t> support;
  std::vector<double> log_ps;
  for (std::size_t k = 0; k < p_s.size(); ++k) {
    if (p_s[k] > 0.0) {
      support.push_back(k);
      log_ps.push_back(std::log(p_s[k]));
    }
  }
  if (support.size() < 2) {
    throw Error(ErrorKind::UnreachableTarget, "a single-class source distribution admits only KL = 0");
  }

  std::gamma_distribution<double> gamma(options.dirichlet_alpha, 1.0);
  std::vector<double> log_px(support.size());
  double best_endpoint = 0.0;
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    for (double& v : log_px) v = std::max(kLogFloor, std::log(gamma(rng)));
    auto kl_at = [&](double lambda) {
      return kl_divergence(path_point(log_ps, log_px, support, p_s.size(), lambda), p_s);
    };
    const double endpoint = kl_at(1.0);
    best_endpoint = std::max(best_endpoint, endpoint);
    if (endpoint < kappa) continue;

    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f = kl_at(mid);
      if (std::abs(f - kappa) <= 1e-9 * std::max(1.0, kappa)) return path_point(log_ps, log_px, support, p_s.size(), mid);
      (f < kappa ? lo : hi) = mid;
    }
    ClassDistribution p_t = path_point(log_ps, log_px, support, p_s.size(), hi);
    if (std::abs(kl_divergence(p_t, p_s) - kappa) <= options.tol) return p_t;
  }
  throw Error(ErrorKind::UnreachableTarget,
              "KL target " + std::to_string(kappa) + " bits unreachable after " +
                  std::to_string(options.max_retries) + " proposals (largest endpoint KL " +
                  std::to_string(best_endpoint) + ")");
}

std::vector<std::size_t> largest_remainder_counts(const ClassDistribution& p, std::size_t total) {
  const std::size_t n = p.size();
  std::vector<std::size_t> counts(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double exact = p[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t j = 0; assigned < total && j < n; ++j) {
    if (p[order[j]] > 0.0) {
      ++counts[order[j]];
      ++assigned;
    }
  }
  return counts;
}

namespace {

struct Quantized {
  std::vector<std::size_t> counts;
  ClassDistribution realized;
  double ci = 0.0;
};

// Returns nullopt and sets `limiting` when the pool cannot supply min_total.
std::optional<Quantized> quantize(const ClassDistribution& p_t, const ClassDistribution& p_s,
                                  const std::vector<std::size_t>& pool, const SubsetOptions& options,
                                  std::size_t& limiting) {
  double capacity = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p_t.size(); ++k) {
    if (p_t[k] <= 0.0) continue;
    const double cap = static_cast<double>(pool[k]) / p_t[k];
    if (cap < capacity) {
      capacity = cap;
      limiting = k;
    }
  }
  auto total = static_cast<std::size_t>(std::floor(capacity + 1e-9));
  if (options.max_total > 0) total = std::min(total, options.max_total);
  while (total >= std::max<std::size_t>(options.min_total, 1)) {
    std::vector<std::size_t> counts = largest_remainder_counts(p_t, total);
    bool fits = true;
    for (std::size_t k = 0; k < counts.size(); ++k) fits = fits && counts[k] <= pool[k];
    if (fits) {
      std::vector<double> probs(counts.size());
      for (std::size_t k = 0; k < counts.size(); ++k) {
        probs[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
      }
      ClassDistribution realized(std::move(probs));
      const double ci = kl_divergence(realized, p_s);
      return Quantized{std::move(counts), std::move(realized), ci};
    }
    --total;
  }
  return std::nullopt;
}

}  // namespace

TargetSubset sample_target_subset(std::span<const int> pool_labels, const ClassDistribution& p_s, double kappa,
                                  Rng& rng, const SubsetOptions& options) {
  const std::size_t num_classes = p_s.size();
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < pool_labels.size(); ++i) {
    const int y = pool_labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw Error(ErrorKind::Bounds, "pool label " + std::to_string(y) + " out of range");
    }
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  std::vector<std::size_t> pool(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) pool[k] = by_class[k].size();

  KlTargetOptions solver = options.solver;
  solver.tol = options.tol;

  std::optional<TargetSubset> best;
  std::size_t limiting = 0;
  const int attempts = kappa == 0.0 ? 1 : std::max(1, options.max_retries);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    ClassDistribution p_t = solve_kl_target(p_s, kappa, rng, solver);
    std::optional<Quantized> q = quantize(p_t, p_s, pool, options, limiting);
    if (!q) continue;
    const double miss = std::abs(q->ci - kappa);
    if (!best || miss < std::abs(best->achieved_ci - kappa)) {
      best = TargetSubset{{}, std::move(q->counts), std::move(q->realized), std::move(p_t), q->ci};
    }
    if (miss <= options.tol) break;
  }
  if (!best) {
    throw Error(ErrorKind::InsufficientPool,
                "target pool cannot supply " + std::to_string(options.min_total) +
                    " instances at the requested class proportions; limiting class " + std::to_string(limiting) +
                    " has " + std::to_string(pool[limiting]) + " instances");
  }

  for (std::size_t k = 0; k < num_classes; ++k) {
    std::vector<std::size_t>& members = by_class[k];
    const std::size_t take = best->counts[k];
    for (std::size_t j = 0; j < take; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, members.size() - 1);
      std::swap(members[j], members[pick(rng)]);
      best->indices.push_back(members[j]);
    }
  }
  std::sort(best->indices.begin(), best->indices.end());
  return std::move(*best);
}

}  // namespace lada
