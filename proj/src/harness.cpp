#include "lada/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "lada/error.hpp"

namespace lada {

namespace {

constexpr std::uint64_t kSubsetStream = 0x5b5e7;
constexpr std::uint64_t kInitStream = 0x1417;

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const ExperimentResult& r) {
  return {
      {"variant", r.variant},
      {"kappa_requested", r.kappa_requested},
      {"ci_achieved", r.ci_achieved},
      {"target_accuracy", number_or_null(r.target_accuracy)},
      {"source_accuracy", number_or_null(r.source_accuracy)},
      {"kl_initial", number_or_null(r.kl_initial)},
      {"kl_final", number_or_null(r.kl_final)},
      {"kl_final_source", number_or_null(r.kl_final_source)},
      {"seed", r.seed},
      {"subset_size", r.subset_indices.size()},
      {"subset_indices", r.subset_indices},
  };
}

ExperimentOutcome run_experiment(const VariantSpec& variant, double kappa, const ExperimentData& data,
                                 const TrainConfig& cfg_template, const SubsetOptions& subset_options,
                                 std::uint64_t seed, TrainTrace* partial_trace) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<int>& source_labels = data.source.require_labels();
  const std::vector<int>& pool_labels = data.target_pool.require_labels();
  if (data.source.num_classes != data.target_pool.num_classes) {
    throw Error(ErrorKind::Shape, "source and target pool use different label spaces");
  }
  const std::size_t num_classes = data.source.num_classes;
  const ClassDistribution p_s = empirical_distribution(source_labels, num_classes);

  Rng subset_rng(mix_seed(seed, kSubsetStream));
  const TargetSubset subset = sample_target_subset(pool_labels, p_s, kappa, subset_rng, subset_options);

  ExperimentOutcome out;
  out.target = data.target_pool.subset(subset.indices);
  const std::vector<int> target_labels = *out.target.labels;  // scorer only
  const Matrix& target_x = out.target.features;
  const ClassDistribution p_t_smooth = subset.realized.smoothed(kDiagnosticSmoothing);

  TrainConfig cfg = cfg_template;
  cfg.variant = variant;
  cfg.seed = seed;
  Rng init_rng(mix_seed(seed, kInitStream));
  out.model = init_model(cfg.model_dims(data.source.dim(), num_classes), init_rng);

  Stage2Options options;
  options.eval_hook = [&](const EvalSnapshot& snap) {
    EvalReport report;
    report.target_accuracy = accuracy(*snap.target_predictions, target_labels);
    if (snap.estimate) report.kl_est_true = kl_divergence(*snap.estimate, p_t_smooth);
    return report;
  };
  try {
    train_stage1(out.model, data.source, cfg, out.trace);
    train_stage2(out.model, data.source, target_x, cfg, out.trace, options);
  } catch (...) {
    if (partial_trace) *partial_trace = out.trace;
    throw;
  }

  ExperimentResult& r = out.result;
  r.variant = variant.name();
  r.kappa_requested = kappa;
  r.ci_achieved = subset.achieved_ci;
  r.seed = seed;
  r.subset_indices = subset.indices;
  r.kl_initial = kl_divergence(ClassDistribution::uniform(num_classes), p_t_smooth);

  const auto stage2 = out.trace.stage(2);
  if (!stage2.empty()) {
    const TraceRow& last = *stage2.back();
    r.target_accuracy = last.target_acc;
    r.source_accuracy = last.source_acc;
    r.kl_final = last.kl_est_true;
    r.kl_final_source = last.kl_est_source;
  } else {
    r.target_accuracy = accuracy(classify_target(out.model, target_x), target_labels);
    r.source_accuracy = accuracy(classify_source(out.model, data.source.features), source_labels);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

void SweepSpec::validate() const {
  if (kappas.empty() || variants.empty() || seeds.empty()) {
    throw Error(ErrorKind::Config, "sweep: kappas, variants and seeds must all be non-empty");
  }
  for (double k : kappas) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw Error(ErrorKind::Config, "sweep: kappas must be finite and >= 0");
  }
  train.validate();
}

std::vector<ExperimentResult> SweepOutcome::results() const {
  std::vector<ExperimentResult> out;
  out.reserve(cells.size());
  for (const SweepCell& c : cells) out.push_back(c.result);
  return out;
}

SweepOutcome run_ci_sweep(const SweepSpec& spec, const ExperimentData& data, std::size_t jobs) {
  spec.validate();
  struct Cell {
    VariantSpec variant;
    double kappa;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const VariantSpec& v : spec.variants) {
    for (double k : spec.kappas) {
      for (std::uint64_t s : spec.seeds) cells.push_back({v, k, s});
    }
  }

  std::vector<std::optional<SweepCell>> done(cells.size());
  std::vector<std::optional<SweepFailure>> failed(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      try {
        ExperimentOutcome o = run_experiment(c.variant, c.kappa, data, spec.train, spec.subset, c.seed);
        done[i] = SweepCell{std::move(o.result), std::move(o.trace)};
      } catch (const std::exception& e) {
        failed[i] = SweepFailure{c.variant.name(), c.kappa, c.seed, e.what()};
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, cells.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  SweepOutcome out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (done[i]) out.cells.push_back(std::move(*done[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
  }
  auto key = [](const std::string& v, double k, std::uint64_t s) { return std::tuple<const std::string&, double, std::uint64_t>(v, k, s); };
  std::sort(out.cells.begin(), out.cells.end(), [&](const SweepCell& a, const SweepCell& b) {
    return key(a.result.variant, a.result.kappa_requested, a.result.seed) <
           key(b.result.variant, b.result.kappa_requested, b.result.seed);
  });
  std::sort(out.failures.begin(), out.failures.end(), [&](const SweepFailure& a, const SweepFailure& b) {
    return key(a.variant, a.kappa, a.seed) < key(b.variant, b.kappa, b.seed);
  });
  return out;
}

std::optional<KlSeries> track_kl_convergence(const TrainTrace& trace) {
  KlSeries series;
  for (const TraceRow* row : trace.stage(2)) {
    if (std::isnan(row->kl_est_true) && std::isnan(row->kl_est_source)) continue;
    series.points.push_back({row->iteration, row->kl_est_true, row->kl_est_source});
  }
  if (series.points.empty()) return std::nullopt;
  return series;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

void write_kl_series_csv(const KlSeries& series, double initial, const std::filesystem::path& path) {
  std::string text = "iteration,kl_est_true,kl_est_source,kl_initial\n";
  for (const KlPoint& p : series.points) {
    text += std::to_string(p.iteration) + "," + fmt(p.kl_est_true) + "," + fmt(p.kl_est_source) + "," + fmt(initial) + "\n";
  }
  write_text(path, text);
}

void export_embeddings(const LadaModel& model, const FeatureDataset& source, const FeatureDataset& target,
                       const std::filesystem::path& path) {
  std::string text = "domain,true_label,predicted_label";
  for (std::size_t j = 0; j < model.dims.encoding_dim; ++j) text += ",e" + std::to_string(j);
  text += '\n';
  auto emit = [&](const FeatureDataset& ds, const Matrix& encoded) {
    const std::vector<int> predicted = argmax_rows(model.classifier.predict(encoded));
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
      text += to_string(ds.domain);
      text += ',';
      if (ds.labels) text += std::to_string((*ds.labels)[static_cast<std::size_t>(i)]);
      text += ',' + std::to_string(predicted[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < encoded.cols(); ++j) text += ',' + fmt(encoded(i, j));
      text += '\n';
    }
  };
  emit(source, encode_source(model, source.features));
  emit(target, encode_target(model, target.features));
  write_text(path, text);
}

std::vector<CurvePoint> accuracy_curve(const std::vector<ExperimentResult>& results) {
  std::map<std::pair<std::string, double>, CurvePoint> groups;
  for (const ExperimentResult& r : results) {
    CurvePoint& p = groups[{r.variant, r.kappa_requested}];
    p.variant = r.variant;
    p.kappa = r.kappa_requested;
    p.ci_mean += r.ci_achieved;
    p.target_acc_mean += r.target_accuracy;
    p.source_acc_mean += r.source_accuracy;
    ++p.runs;
  }
  std::vector<CurvePoint> out;
  for (auto& [key, p] : groups) {
    const auto n = static_cast<double>(p.runs);
    p.ci_mean /= n;
    p.target_acc_mean /= n;
    p.source_acc_mean /= n;
    out.push_back(p);
  }
  return out;
}

void write_accuracy_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::string text = "variant,kappa,ci_mean,target_acc_mean,source_acc_mean,runs\n";
  for (const CurvePoint& p : curve) {
    text += p.variant + "," + fmt(p.kappa) + "," + fmt(p.ci_mean) + "," + fmt(p.target_acc_mean) + "," +
            fmt(p.source_acc_mean) + "," + std::to_string(p.runs) + "\n";
  }
  write_text(path, text);
}

}  // namespace lada
