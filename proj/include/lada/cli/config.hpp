#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lada/classdist.hpp"
#include "lada/datasets.hpp"
#include "lada/training.hpp"

namespace lada::cli {

/// `[section]` headers, `key = value` lines, `#` comments. Keys before the
/// first header live in section "".
using IniDocument = std::map<std::string, std::map<std::string, std::string>>;

IniDocument parse_ini(const std::string& text, const std::string& origin);

struct DataConfig {
  std::optional<std::filesystem::path> source;  // labeled CSV
  std::optional<std::filesystem::path> target;  // labeled pool CSV
  DomainPairSpec synthetic;                     // used when no paths are given
};

struct RunConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  double kappa = 0.0;
  SubsetOptions subset;
  TrainConfig train;
  std::vector<double> sweep_kappas{0.05, 0.3, 0.6, 0.9};
  std::vector<VariantSpec> sweep_variants{VariantSpec::parse("LADA-0"), VariantSpec::parse("LADA-3T")};
  std::vector<std::uint64_t> sweep_seeds;  // empty = {seed}

  std::vector<std::uint64_t> resolved_sweep_seeds() const;
};

/// Builds a config from a parsed document; relative data paths resolve
/// against `base_dir`. Unknown keys and malformed values throw Config errors
/// naming the field as `section.key`.
RunConfig config_from_ini(const IniDocument& doc, const std::filesystem::path& base_dir);

/// Reads either an INI file or a manifest.json written by a previous run.
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved {section: {key: value}} snapshot; values are strings in
/// the INI syntax so the snapshot reloads through the same parser.
nlohmann::json config_snapshot(const RunConfig& cfg);
RunConfig config_from_snapshot(const nlohmann::json& snapshot);

/// Loads the configured datasets, or generates the synthetic pair from the
/// master seed.
struct LoadedData {
  FeatureDataset source;
  FeatureDataset target_pool;
};
LoadedData load_data(const RunConfig& cfg);

std::string format_double(double v);

}  // namespace lada::cli
