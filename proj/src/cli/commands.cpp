#include "lada/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lada/cli/config.hpp"
#include "lada/harness.hpp"

namespace lada::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolName = "lada";
constexpr const char* kToolVersion = "0.1.0";
constexpr std::uint64_t kSampleStream = 0x5a3c1;

struct CommonFlags {
  std::string config;
  std::string out = "lada_out";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

struct SampleFlags {
  std::string dataset;
  std::string source;
  std::optional<double> kappa;
  std::optional<double> tol;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string indices_text(const std::vector<std::size_t>& indices) {
  std::string text;
  for (std::size_t i : indices) text += std::to_string(i) + "\n";
  return text;
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = flags.config.empty() ? config_from_ini({}, fs::current_path()) : load_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  return cfg;
}

fs::path prepare_out(const CommonFlags& flags) {
  const fs::path out(flags.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& cfg) {
  write_json(out / "manifest.json", {{"tool", kToolName},
                                     {"version", kToolVersion},
                                     {"command", command},
                                     {"seed", cfg.seed},
                                     {"out", fs::absolute(out).lexically_normal().string()},
                                     {"timestamp", utc_timestamp()},
                                     {"config", config_snapshot(cfg)}});
}

int cmd_gen_data(const CommonFlags& flags, std::ostream& log) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out = prepare_out(flags);
  write_manifest(out, "gen-data", cfg);
  RunConfig synthetic = cfg;
  synthetic.data.source.reset();
  synthetic.data.target.reset();
  const LoadedData data = load_data(synthetic);
  save_feature_csv(data.source, out / "source.csv");
  save_feature_csv(data.target_pool, out / "target_pool.csv");
  log << "wrote " << data.source.size() << " source and " << data.target_pool.size() << " target rows to "
      << out.string() << "\n";
  return kExitOk;
}

int cmd_sample_ci(const CommonFlags& flags, const SampleFlags& sample, std::ostream& log) {
  RunConfig cfg = resolve_config(flags);
  if (!sample.dataset.empty()) cfg.data.target = fs::absolute(sample.dataset).lexically_normal();
  if (!sample.source.empty()) cfg.data.source = fs::absolute(sample.source).lexically_normal();
  if (sample.kappa) cfg.kappa = *sample.kappa;
  if (sample.tol) cfg.subset.tol = *sample.tol;
  if (!cfg.data.target) throw Error(ErrorKind::Config, "data.target: a dataset is required (--dataset)");
  if (!(cfg.kappa >= 0.0)) throw Error(ErrorKind::Config, "subset.kappa: must be >= 0");
  if (!(cfg.subset.tol > 0.0)) throw Error(ErrorKind::Config, "subset.tol: must be > 0");
  if (!fs::exists(*cfg.data.target)) throw Error(ErrorKind::Config, "data.target: no such file " + cfg.data.target->string());

  const fs::path out = prepare_out(flags);
  write_manifest(out, "sample-ci", cfg);

  const FeatureDataset pool = load_feature_csv(*cfg.data.target, Domain::Target);
  std::optional<ClassDistribution> p_s;
  std::size_t num_classes = pool.num_classes;
  if (cfg.data.source) {
    if (!fs::exists(*cfg.data.source)) throw Error(ErrorKind::Config, "data.source: no such file " + cfg.data.source->string());
    const FeatureDataset source = load_feature_csv(*cfg.data.source, Domain::Source);
    num_classes = std::max(num_classes, source.num_classes);
    p_s = empirical_distribution(source.require_labels(), num_classes);
  } else {
    p_s = ClassDistribution::uniform_over(num_classes - 1, num_classes);
  }
  Rng rng(mix_seed(cfg.seed, kSampleStream));
  const TargetSubset subset = sample_target_subset(pool.require_labels(), *p_s, cfg.kappa, rng, cfg.subset);
  write_text(out / "subset_indices.txt", indices_text(subset.indices));
  log << "achieved_ci " << format_double(subset.achieved_ci) << "\n";
  log << "subset_size " << subset.indices.size() << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, std::ostream& log) {
  const RunConfig cfg = resolve_config(flags);
  const fs::path out = prepare_out(flags);
  write_manifest(out, "train", cfg);
  const LoadedData loaded = load_data(cfg);
  const ExperimentData data{loaded.source, loaded.target_pool};

  TrainTrace partial;
  ExperimentOutcome outcome;
  try {
    outcome = run_experiment(cfg.train.variant, cfg.kappa, data, cfg.train, cfg.subset, cfg.seed, &partial);
  } catch (...) {
    partial.write_csv(out / "trace.csv");
    throw;
  }
  outcome.trace.write_csv(out / "trace.csv");
  write_text(out / "subset_indices.txt", indices_text(outcome.result.subset_indices));
  save_checkpoint(outcome.model, out / "checkpoint.bin");
  export_embeddings(outcome.model, data.source, outcome.target, out / "embeddings.csv");
  write_json(out / "result.json", to_json(outcome.result));
  write_json(out / "timings.json", {{"wall_seconds", outcome.result.wall_seconds}});
  log << outcome.result.variant << " ci " << format_double(outcome.result.ci_achieved) << " target_accuracy "
      << format_double(outcome.result.target_accuracy) << " source_accuracy "
      << format_double(outcome.result.source_accuracy) << "\n";
  return kExitOk;
}

std::string kl_file_name(const ExperimentResult& r) {
  return r.variant + "_k" + format_double(r.kappa_requested) + "_s" + std::to_string(r.seed) + ".csv";
}

int cmd_sweep(const CommonFlags& flags, std::ostream& log, std::ostream& err) {
  const RunConfig cfg = resolve_config(flags);
  SweepSpec spec;
  spec.kappas = cfg.sweep_kappas;
  spec.variants = cfg.sweep_variants;
  spec.seeds = cfg.resolved_sweep_seeds();
  spec.train = cfg.train;
  spec.subset = cfg.subset;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("sweep: ") + e.what());
  }
  const fs::path out = prepare_out(flags);
  write_manifest(out, "sweep", cfg);
  const LoadedData loaded = load_data(cfg);
  const ExperimentData data{loaded.source, loaded.target_pool};

  const SweepOutcome outcome = run_ci_sweep(spec, data, flags.jobs);

  nlohmann::json results = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::array();
  fs::create_directories(out / "kl");
  for (const SweepCell& cell : outcome.cells) {
    results.push_back(to_json(cell.result));
    timings.push_back({{"variant", cell.result.variant},
                       {"kappa", cell.result.kappa_requested},
                       {"seed", cell.result.seed},
                       {"wall_seconds", cell.result.wall_seconds}});
    if (const auto series = track_kl_convergence(cell.trace)) {
      write_kl_series_csv(*series, cell.result.kl_initial, out / "kl" / kl_file_name(cell.result));
    }
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const SweepFailure& f : outcome.failures) {
    failures.push_back({{"variant", f.variant}, {"kappa", f.kappa}, {"seed", f.seed}, {"message", f.message}});
    err << "cell " << f.variant << " kappa " << format_double(f.kappa) << " seed " << f.seed
        << " failed: " << f.message << "\n";
  }
  write_json(out / "sweep.json", {{"spec", config_snapshot(cfg)}, {"results", results}, {"failures", failures}});
  write_json(out / "timings.json", timings);
  write_accuracy_curve_csv(accuracy_curve(outcome.results()), out / "accuracy_vs_ci.csv");
  log << outcome.cells.size() << " cells done, " << outcome.failures.size() << " failed\n";
  return outcome.cells.empty() ? kExitRuntime : kExitOk;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Spec:
    case ErrorKind::Policy:
      return kExitConfig;
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::EmptyInput:
    case ErrorKind::InsufficientPool:
    case ErrorKind::UnreachableTarget:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-code adversarial domain adaptation lab", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  SampleFlags sample;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI config or a manifest.json from an earlier run");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--seed", flags.seed, "master seed, overrides the config");
  };
  CLI::App* gen = app.add_subcommand("gen-data", "write the synthetic source and target pool CSVs");
  add_common(gen);
  CLI::App* sample_cmd = app.add_subcommand("sample-ci", "sample a target subset at a requested class imbalance");
  add_common(sample_cmd);
  sample_cmd->add_option("--dataset", sample.dataset, "labeled target pool CSV");
  sample_cmd->add_option("--source", sample.source, "labeled source CSV giving p_s (default: uniform)");
  sample_cmd->add_option("--kappa", sample.kappa, "requested CI in bits");
  sample_cmd->add_option("--tol", sample.tol, "accepted |CI - kappa|");
  CLI::App* train = app.add_subcommand("train", "run one experiment");
  add_common(train);
  CLI::App* sweep = app.add_subcommand("sweep", "run variants x kappas x seeds");
  add_common(sweep);
  sweep->add_option("--jobs", flags.jobs, "parallel cells")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags, out);
    if (sample_cmd->parsed()) return cmd_sample_ci(flags, sample, out);
    if (train->parsed()) return cmd_train(flags, out);
    return cmd_sweep(flags, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace lada::cli
