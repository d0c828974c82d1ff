#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lada/classdist.hpp"
#include "lada/error.hpp"
#include "support.hpp"

using namespace lada;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected lada::Error";
  return ErrorKind::State;
}

ClassDistribution random_dist(std::size_t n, Rng& rng, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double total = 0.0;
  for (double& v : p) {
    v = u(rng) < zero_prob ? 0.0 : u(rng);
    total += v;
  }
  if (total == 0.0) {
    p[0] = 1.0;
    total = 1.0;
  }
  for (double& v : p) v /= total;
  return ClassDistribution(p);
}

long double brute_kl(const ClassDistribution& p, const ClassDistribution& q) {
  long double s = 0.0L;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0) s += static_cast<long double>(p[k]) * std::log2(static_cast<long double>(p[k]) / q[k]);
  }
  return s;
}

// KL recomputed from raw labels at the chosen indices.
double ci_from_indices(const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                       const ClassDistribution& p_s) {
  std::vector<double> counts(p_s.size(), 0.0);
  for (std::size_t i : idx) counts[static_cast<std::size_t>(labels[i])] += 1.0;
  long double s = 0.0L;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    const long double pk = counts[k] / static_cast<long double>(idx.size());
    s += pk * std::log2(pk / p_s[k]);
  }
  return static_cast<double>(s);
}

std::vector<int> balanced_pool(std::size_t per_class, std::size_t classes) {
  std::vector<int> labels;
  for (std::size_t k = 0; k < classes; ++k) labels.insert(labels.end(), per_class, static_cast<int>(k));
  std::shuffle(labels.begin(), labels.end(), Rng(5));
  return labels;
}

}  // namespace

TEST(ClassDistribution, ValidatesMassAndSign) {
  EXPECT_NO_THROW(ClassDistribution({0.25, 0.75}));
  EXPECT_EQ(kind_of([] { ClassDistribution({0.5, 0.6}); }), ErrorKind::Numeric);
  EXPECT_EQ(kind_of([] { ClassDistribution({1.2, -0.2}); }), ErrorKind::Numeric);
  EXPECT_EQ(kind_of([] { ClassDistribution(std::vector<double>{}); }), ErrorKind::EmptyInput);
  const ClassDistribution u = ClassDistribution::uniform_over(3, 4);
  EXPECT_DOUBLE_EQ(u[0], 1.0 / 3);
  EXPECT_EQ(u[3], 0.0);
  const ClassDistribution s = u.smoothed(0.1);
  EXPECT_GT(s[3], 0.0);
  EXPECT_NEAR(std::accumulate(s.vector().begin(), s.vector().end(), 0.0), 1.0, 1e-12);
}

TEST(KlDivergence, KnownValues) {
  const ClassDistribution p({0.5, 0.5});
  const ClassDistribution q({0.25, 0.75});
  EXPECT_NEAR(kl_divergence(p, q), 0.5 * std::log2(2.0) + 0.5 * std::log2(0.5 / 0.75), 1e-15);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(ClassDistribution({1, 0, 0, 0}), ClassDistribution::uniform(4)), 2.0, 1e-15);
}

TEST(KlDivergence, SupportViolationAndShape) {
  EXPECT_EQ(kind_of([] { kl_divergence(ClassDistribution({0.5, 0.5}), ClassDistribution({1.0, 0.0})); }),
            ErrorKind::DivergenceUndefined);
  EXPECT_NO_THROW(kl_divergence(ClassDistribution({1.0, 0.0}), ClassDistribution({0.5, 0.5})));
  EXPECT_EQ(kind_of([] { kl_divergence(ClassDistribution({1.0}), ClassDistribution({0.5, 0.5})); }),
            ErrorKind::Shape);
}

TEST(KlDivergence, BruteForceOracleProperty) {
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i % 12);
    const ClassDistribution p = random_dist(n, rng, 0.3);
    const ClassDistribution q = random_dist(n, rng).smoothed(1e-6);
    const double kl = kl_divergence(p, q);
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(kl, static_cast<double>(brute_kl(p, q)), 1e-12);
  }
}

TEST(Entropy, BoundsAndKnownValues) {
  EXPECT_EQ(entropy(ClassDistribution({1.0, 0.0})), 0.0);
  EXPECT_NEAR(entropy(ClassDistribution::uniform(8)), 3.0, 1e-15);
  Rng rng(22);
  for (int i = 0; i < 200; ++i) {
    const ClassDistribution p = random_dist(11, rng, 0.2);
    const double h = entropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(11.0) + 1e-12);
    // H(p) = log2 n - KL(p || uniform)
    EXPECT_NEAR(h, std::log2(11.0) - kl_divergence(p, ClassDistribution::uniform(11)), 1e-12);
  }
}

TEST(EmpiricalDistribution, CountsAndErrors) {
  const std::vector<int> y{0, 2, 2, 2};
  const ClassDistribution p = empirical_distribution(y, 4);
  EXPECT_EQ(p.vector(), (std::vector<double>{0.25, 0.0, 0.75, 0.0}));
  EXPECT_EQ(kind_of([] { empirical_distribution(std::vector<int>{}, 3); }), ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([] { empirical_distribution(std::vector<int>{3}, 3); }), ErrorKind::Bounds);
}

TEST(RelaxedAssignment, MarginalAndValidation) {
  Matrix P(2, 3);
  P << 1, 0, 0, 0.5, 0.5, 0;
  const ClassDistribution m = relaxed_marginal(RelaxedAssignment::from_probs(P));
  EXPECT_NEAR(m[0], 0.75, 1e-15);
  EXPECT_NEAR(m[1], 0.25, 1e-15);
  Matrix bad(1, 2);
  bad << 0.7, 0.7;
  EXPECT_EQ(kind_of([&] { RelaxedAssignment::from_probs(bad); }), ErrorKind::Numeric);
  EXPECT_EQ(kind_of([] { relaxed_marginal(RelaxedAssignment::from_logits(Matrix(0, 3))); }), ErrorKind::EmptyInput);
}

TEST(RelaxedEntropy, OneHotLimitEqualsDiscreteEntropy) {
  Rng rng(23);
  std::uniform_int_distribution<int> pick(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(40);
    for (int& y : labels) y = pick(rng);
    Matrix P = Matrix::Zero(40, 6);
    for (std::size_t i = 0; i < labels.size(); ++i) P(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    const double h = relaxed_entropy(RelaxedAssignment::from_probs(P)).value;
    EXPECT_NEAR(h, entropy(empirical_distribution(labels, 6)), 1e-12);
  }
}

TEST(RelaxedEntropy, ThetaGradientMatchesFiniteDifferences) {
  Rng rng(24);
  Matrix theta = lada::testing::random_matrix(6, 4, rng, 1.5);
  const RelaxedEntropy h = relaxed_entropy(RelaxedAssignment::from_logits(theta));
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta.data()[i];
    theta.data()[i] = keep + eps;
    const double up = relaxed_entropy(RelaxedAssignment::from_logits(theta)).value;
    theta.data()[i] = keep - eps;
    const double down = relaxed_entropy(RelaxedAssignment::from_logits(theta)).value;
    theta.data()[i] = keep;
    EXPECT_NEAR(h.grad_theta.data()[i], (up - down) / (2 * eps), 1e-8);
  }
}

TEST(SolveKlTarget, HitsRequestedDivergence) {
  Rng rng(25);
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  for (double kappa : {0.05, 0.3, 0.9, 2.0}) {
    const ClassDistribution p_t = solve_kl_target(p_s, kappa, rng);
    EXPECT_NEAR(kl_divergence(p_t, p_s), kappa, 1e-6);
    EXPECT_EQ(p_t[10], 0.0);  // stays on the source support
  }
  EXPECT_EQ(solve_kl_target(p_s, 0.0, rng), p_s);
}

TEST(SolveKlTarget, UnreachableAndInvalid) {
  Rng rng(26);
  const ClassDistribution p_s = ClassDistribution::uniform(4);
  // KL(. || uniform over 4) never exceeds 2 bits.
  EXPECT_EQ(kind_of([&] { solve_kl_target(p_s, 2.5, rng); }), ErrorKind::UnreachableTarget);
  EXPECT_EQ(kind_of([&] { solve_kl_target(ClassDistribution({1.0, 0.0}), 0.1, rng); }), ErrorKind::UnreachableTarget);
  EXPECT_EQ(kind_of([&] { solve_kl_target(p_s, -0.1, rng); }), ErrorKind::Bounds);
}

TEST(LargestRemainder, SumsExactlyAndStaysClose) {
  Rng rng(27);
  for (int trial = 0; trial < 300; ++trial) {
    const ClassDistribution p = random_dist(2 + trial % 10, rng, 0.3);
    const std::size_t total = 1 + static_cast<std::size_t>(trial * 7 % 500);
    const auto counts = largest_remainder_counts(p, total);
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), total);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      EXPECT_LT(std::abs(static_cast<double>(counts[k]) - p[k] * total), 1.0);
      if (p[k] == 0.0) EXPECT_EQ(counts[k], 0u);
    }
  }
}

TEST(SampleTargetSubset, KappaZeroIsProportional) {
  const std::vector<int> pool = balanced_pool(400, 10);
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  Rng rng(28);
  const TargetSubset s = sample_target_subset(pool, p_s, 0.0, rng);
  EXPECT_EQ(s.indices.size(), 4000u);
  EXPECT_LE(ci_from_indices(pool, s.indices, p_s), 0.02);
  EXPECT_EQ(s.achieved_ci, 0.0);
}

TEST(SampleTargetSubset, AchievedCiIsReproducibleFromIndices) {
  const std::vector<int> pool = balanced_pool(400, 10);
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  Rng rng(29);
  for (double kappa : {0.1, 0.6, 0.9}) {
    const TargetSubset s = sample_target_subset(pool, p_s, kappa, rng);
    EXPECT_TRUE(std::is_sorted(s.indices.begin(), s.indices.end()));
    EXPECT_EQ(std::set<std::size_t>(s.indices.begin(), s.indices.end()).size(), s.indices.size());
    EXPECT_GE(s.indices.size(), 100u);
    const double ci = ci_from_indices(pool, s.indices, p_s);
    EXPECT_NEAR(ci, s.achieved_ci, 1e-12);
    EXPECT_NEAR(ci, kappa, 0.02);
    EXPECT_EQ(s.realized, empirical_distribution(
                              [&] {
                                std::vector<int> y;
                                for (std::size_t i : s.indices) y.push_back(pool[i]);
                                return y;
                              }(),
                              11));
  }
}

TEST(SampleTargetSubset, HonoursSizeCap) {
  const std::vector<int> pool = balanced_pool(400, 10);
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  Rng rng(30);
  SubsetOptions opt;
  opt.max_total = 500;
  const TargetSubset s = sample_target_subset(pool, p_s, 0.3, rng, opt);
  EXPECT_LE(s.indices.size(), 500u);
  EXPECT_NEAR(ci_from_indices(pool, s.indices, p_s), 0.3, 0.02);
}

TEST(SampleTargetSubset, ErrorsNameTheProblem) {
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  Rng rng(31);
  const std::vector<int> pool = balanced_pool(400, 10);
  EXPECT_EQ(kind_of([&] { sample_target_subset(pool, p_s, 99.0, rng); }), ErrorKind::UnreachableTarget);

  std::vector<int> thin = balanced_pool(400, 10);
  thin.erase(std::remove(thin.begin(), thin.end(), 3), thin.end());
  thin.insert(thin.end(), 5, 3);
  SubsetOptions opt;
  opt.min_total = 1000;
  try {
    sample_target_subset(thin, p_s, 0.0, rng, opt);
    FAIL() << "expected InsufficientPool";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientPool);
    EXPECT_NE(std::string(e.what()).find("limiting class 3"), std::string::npos) << e.what();
  }
  const std::vector<int> out_of_range{0, 11};
  EXPECT_EQ(kind_of([&] { sample_target_subset(out_of_range, p_s, 0.0, rng); }), ErrorKind::Bounds);
}

TEST(SampleTargetSubset, DeterministicForSeed) {
  const std::vector<int> pool = balanced_pool(400, 10);
  const ClassDistribution p_s = ClassDistribution::uniform_over(10, 11);
  Rng a(32);
  Rng b(32);
  EXPECT_EQ(sample_target_subset(pool, p_s, 0.5, a).indices, sample_target_subset(pool, p_s, 0.5, b).indices);
}
