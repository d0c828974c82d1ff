#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lada/classdist.hpp"
#include "lada/datasets.hpp"
#include "lada/lada_net.hpp"
#include "lada/training.hpp"

#include <nlohmann/json.hpp>

namespace lada {

/// Labeled source and labeled target pool. Pool labels are only read by the
/// subset sampler and the final scorer.
struct ExperimentData {
  FeatureDataset source;
  FeatureDataset target_pool;
};

struct ExperimentResult {
  std::string variant;
  double kappa_requested = 0.0;
  double ci_achieved = 0.0;
  double target_accuracy = kAbsent;
  double source_accuracy = kAbsent;
  double kl_initial = kAbsent;       // KL(uniform || p_t)
  double kl_final = kAbsent;         // KL(p̂_t || p_t)
  double kl_final_source = kAbsent;  // KL(p̂_t || p_s)
  std::uint64_t seed = 0;
  std::vector<std::size_t> subset_indices;
  double wall_seconds = 0.0;  // kept out of persisted JSON
};

/// Persisted form; wall time is excluded so reruns compare byte-identically.
nlohmann::json to_json(const ExperimentResult& r);

struct ExperimentOutcome {
  ExperimentResult result;
  TrainTrace trace;
  LadaModel model;
  FeatureDataset target;  // the sampled subset, labels included
};

/// Subset sampling at kappa, stage 1, stage 2, then scoring on the held
/// subset labels. The seed drives sampling, initialization and training.
/// When training throws, the rows produced so far land in `partial_trace`.
ExperimentOutcome run_experiment(const VariantSpec& variant, double kappa, const ExperimentData& data,
                                 const TrainConfig& cfg, const SubsetOptions& subset, std::uint64_t seed,
                                 TrainTrace* partial_trace = nullptr);

struct SweepSpec {
  std::vector<double> kappas;
  std::vector<VariantSpec> variants;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  SubsetOptions subset;

  /// Throws ErrorKind::Config on empty lists or negative kappas.
  void validate() const;
};

struct SweepFailure {
  std::string variant;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::string message;
};

struct SweepCell {
  ExperimentResult result;
  TrainTrace trace;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;  // sorted by (variant, kappa, seed)
  std::vector<SweepFailure> failures;

  std::vector<ExperimentResult> results() const;
};

/// Runs the full variants x kappas x seeds product on up to `jobs` threads.
/// A failing cell is recorded and the sweep continues.
SweepOutcome run_ci_sweep(const SweepSpec& spec, const ExperimentData& data, std::size_t jobs = 1);

struct KlPoint {
  std::size_t iteration = 0;
  double kl_est_true = kAbsent;
  double kl_est_source = kAbsent;
};

struct KlSeries {
  std::vector<KlPoint> points;
  double final_true() const { return points.empty() ? kAbsent : points.back().kl_est_true; }
};

/// Evaluation checkpoints of stage 2 carrying KL estimates; nullopt when the
/// run never estimated p̂_t (LADA-0).
std::optional<KlSeries> track_kl_convergence(const TrainTrace& trace);

void write_kl_series_csv(const KlSeries& series, double initial, const std::filesystem::path& path);

/// Rows {domain, true_label, predicted_label, e0..}; source rows are encoded
/// by E_s and target rows by E_t.
void export_embeddings(const LadaModel& model, const FeatureDataset& source, const FeatureDataset& target,
                       const std::filesystem::path& path);

struct CurvePoint {
  std::string variant;
  double kappa = 0.0;
  double ci_mean = 0.0;
  double target_acc_mean = 0.0;
  double source_acc_mean = 0.0;
  std::size_t runs = 0;
};

/// Seed means per (variant, kappa), ordered like the sweep results.
std::vector<CurvePoint> accuracy_curve(const std::vector<ExperimentResult>& results);

void write_accuracy_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

}  // namespace lada
