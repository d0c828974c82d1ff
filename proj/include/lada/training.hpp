#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lada/classdist.hpp"
#include "lada/datasets.hpp"
#include "lada/lada_net.hpp"
#include "lada/ndnum/optimizer.hpp"

namespace lada {

/// Target-code policy of stage 2.
enum class Variant { Zero, Uniform, SourceDist, Target };

enum class Regime { TwoStage, ThreePlayer };

/// Variant plus regime, named like "LADA-0", "LADA-2U", "LADA-3T". A name
/// without a regime digit ("LADA-U") means two-stage.
struct VariantSpec {
  Variant variant = Variant::Target;
  Regime regime = Regime::ThreePlayer;

  std::string name() const;
  static VariantSpec parse(std::string_view name);
  bool operator==(const VariantSpec&) const = default;
};

struct TrainConfig {
  VariantSpec variant{};
  std::size_t source_batch = 32;
  std::size_t target_batch = 32;
  double learning_rate = 1e-3;
  std::size_t stage1_iters = 1000;
  std::size_t stage2_iters = 2000;
  double dropout = 0.5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 1;
  std::optional<std::size_t> warmup_iters;  // LADA-T; default 30% of stage2_iters
  std::size_t reestimate_every = 200;       // LADA-T
  std::size_t eval_every = 100;
  std::size_t encoding_dim = 128;
  std::vector<std::size_t> generator_hidden{256, 128, 64};

  /// Throws ErrorKind::Config on inconsistent settings.
  void validate() const;
  std::size_t resolved_warmup() const;
  ModelDims model_dims(std::size_t feature_dim, std::size_t num_classes) const;
  OptimizerSettings optimizer_settings() const;
};

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

/// Smoothing mass used wherever a diagnostic KL compares a full-support
/// estimate against a reference with empty classes.
inline constexpr double kDiagnosticSmoothing = 1e-3;

struct TraceRow {
  std::size_t iteration = 0;
  int stage = 2;
  double loss_cls = kAbsent;
  double loss_adv_d = kAbsent;
  double loss_adv_e = kAbsent;
  double loss_q = kAbsent;
  double mean_d_source = kAbsent;
  double mean_d_target = kAbsent;
  double source_acc = kAbsent;
  double target_acc = kAbsent;
  double entropy_p = kAbsent;
  double kl_est_true = kAbsent;    // KL(p̂_t || p_t)
  double kl_est_source = kAbsent;  // KL(p̂_t || p_s)
};

struct TrainTrace {
  std::vector<TraceRow> rows;

  std::vector<const TraceRow*> stage(int s) const;
  /// Fixed columns; absent values are written as empty cells.
  void write_csv(const std::filesystem::path& path) const;
  static std::string csv_header();
};

/// One stage-2 minibatch pair.
struct Stage2Batch {
  std::vector<std::size_t> source_index;
  std::vector<std::size_t> target_index;
  Matrix source_x;
  std::vector<int> source_y;
  LatentCodeBatch source_codes;
  Matrix target_x;
  LatentCodeBatch target_codes;
};

// ---- losses with analytic gradients; pure functions of the model ----------

struct DiscriminatorLoss {
  double loss = 0.0;
  double mean_d_source = 0.0;
  double mean_d_target = 0.0;
  MlpGrads generator;
  MlpGrads discriminator;
};

/// L_adv^D = -mean_s log D(G[E_s x_s, c_s]) - mean_t log(1 - D(G[E_t x_t, c_t])).
DiscriminatorLoss discriminator_loss(const LadaModel& model, const Matrix& xs, const LatentCodeBatch& cs,
                                     const Matrix& xt, const LatentCodeBatch& ct, const PassMode& mode);

struct EncoderLoss {
  double loss = 0.0;
  MlpGrads target_encoder;
};

/// L_adv^E = -mean_t log D(G[E_t x_t, c_t]).
EncoderLoss encoder_loss(const LadaModel& model, const Matrix& xt, const LatentCodeBatch& ct, const PassMode& mode);

struct AuxiliaryLoss {
  double loss = 0.0;       // likelihood terms + H(P)
  double entropy_p = 0.0;  // H(P), bits
  MlpGrads auxiliary;
  std::optional<MlpGrads> generator;       // through_trunk only
  std::optional<MlpGrads> source_encoder;  // through_trunk only
};

/// L^Q = -mean_s log Q(c_s|G[E_s x_s, c_s]) - mean_t log Q(c_t|G[E_t x_t, c_t]) + H(P),
/// with P the fused C/Q prediction on the target batch. C is held constant.
AuxiliaryLoss auxiliary_loss(const LadaModel& model, const Matrix& xs, const LatentCodeBatch& cs, const Matrix& xt,
                             const LatentCodeBatch& ct, const PassMode& mode, bool through_trunk);

struct ClassifierLoss {
  double loss = 0.0;
  MlpGrads source_encoder;
  MlpGrads classifier;
};

/// L_cls = mean cross-entropy of C(E_s x) against the source labels.
ClassifierLoss classification_loss(const LadaModel& model, const Matrix& xs, std::span<const int> ys,
                                   const PassMode& mode);

// ---- steps: loss + update of exactly the named parameter sets -------------

/// Owns the optimizer state of every stage-2 step.
class AdversarialTrainer {
 public:
  AdversarialTrainer(LadaModel& model, const TrainConfig& cfg, Rng& rng);

  /// Updates G and the D head.
  DiscriminatorLoss step_discriminator(const Stage2Batch& batch);
  /// Updates E_t only.
  double step_encoder(const Stage2Batch& batch);
  /// Updates the Q head; three-player also updates E_s. The gradient reaches
  /// E_s through G, but G itself is only trained by the D step.
  AuxiliaryLoss step_auxiliary(const Stage2Batch& batch);
  /// Updates E_s and C.
  double step_classifier(const Stage2Batch& batch);

 private:
  PassMode train_mode() const { return {cfg_.dropout, &rng_, true}; }

  LadaModel& model_;
  TrainConfig cfg_;
  Rng& rng_;
  Optimizer d_generator_, d_head_;
  Optimizer e_target_;
  Optimizer q_head_, q_source_;
  Optimizer cls_source_, cls_head_;
};

/// Stage 1: minimizes L_cls over E_s and C, then copies E_s into E_t.
void train_stage1(LadaModel& model, const FeatureDataset& source, const TrainConfig& cfg, TrainTrace& trace);

/// Distribution the current code policy draws target codes from.
std::optional<ClassDistribution> code_prior(Variant variant, const ClassDistribution& p_s,
                                            const std::optional<ClassDistribution>& estimate, std::size_t num_classes);

/// Column mean of fused C/Q predictions over the target set, Q marginalized
/// over `prior` (the current code policy).
ClassDistribution estimate_target_distribution(const LadaModel& model, const Matrix& x_target,
                                               const ClassDistribution& prior);

/// Target predictions used for scoring: fused C/Q for LADA-U/S/T, C alone for
/// LADA-0 (prior absent).
Matrix target_predictions(const LadaModel& model, const Matrix& x_target,
                          const std::optional<ClassDistribution>& prior);

struct EvalSnapshot {
  std::size_t iteration = 0;
  const LadaModel* model = nullptr;
  const Matrix* target_predictions = nullptr;
  std::optional<ClassDistribution> estimate;  // p̂_t; absent for LADA-0
};

struct EvalReport {
  double target_accuracy = kAbsent;
  double kl_est_true = kAbsent;
};

/// Label-holding callers plug scoring in here; the trainer never sees target labels.
using EvalHook = std::function<EvalReport(const EvalSnapshot&)>;

using BatchObserver = std::function<void(std::size_t iteration, const Stage2Batch&)>;

struct Stage2Options {
  EvalHook eval_hook;
  BatchObserver on_batch;
};

/// Stage-2 loop: D step, E_t step, Q step (skipped for LADA-0), then one
/// L_cls step in the three-player regime. Trace rows are appended as they are
/// produced, so a failure leaves a partial trace behind.
void train_stage2(LadaModel& model, const FeatureDataset& source, const Matrix& target_x, const TrainConfig& cfg,
                  TrainTrace& trace, const Stage2Options& options = {});

/// Fraction of rows whose argmax equals the label.
double accuracy(const Matrix& probs, std::span<const int> labels);

}  // namespace lada
