#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lada/datasets.hpp"
#include "lada/ndnum/matrix.hpp"
#include "lada/training.hpp"

namespace lada::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Matrix random_stochastic(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return softmax_rows(random_matrix(rows, cols, rng, 2.0));
}

inline DomainPairSpec small_pair_spec() {
  DomainPairSpec s;
  s.classes = 4;
  s.dim = 8;
  s.n_source = 200;
  s.n_target_pool = 400;
  return s;
}

inline TrainConfig small_train_config() {
  TrainConfig c;
  c.stage1_iters = 60;
  c.stage2_iters = 40;
  c.eval_every = 10;
  c.encoding_dim = 12;
  c.generator_hidden = {16, 8};
  c.source_batch = 8;
  c.target_batch = 8;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lada_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lada::testing
