#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lada/ndnum/matrix.hpp"

namespace lada {

enum class Domain { Source, Target };

std::string_view to_string(Domain domain);

/// Feature vectors with optional labels in [0, num_classes). The label space
/// has K+1 entries; index K is the "unknown" class.
struct FeatureDataset {
  Matrix features;
  std::optional<std::vector<int>> labels;
  Domain domain = Domain::Source;
  std::size_t num_classes = 0;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool labeled() const { return labels.has_value(); }

  /// Throws Shape/Bounds when labels disagree with the features or label space.
  void validate() const;

  FeatureDataset subset(std::span<const std::size_t> indices) const;
  /// Copy with labels removed.
  FeatureDataset unlabeled() const;
  const std::vector<int>& require_labels() const;
};

struct DomainPairSpec {
  std::size_t classes = 10;  // K
  std::size_t dim = 64;
  double class_radius = 4.0;
  double sigma = 1.0;
  double rotation = 0.5235987755982988;  // pi/6, applied in the (f0, f1) plane
  double translation = 1.0;
  std::size_t n_source = 2000;
  std::size_t n_target_pool = 4000;

  void validate() const;
};

struct DomainPair {
  FeatureDataset source;
  FeatureDataset target_pool;
  Matrix class_means;       // K x dim, source-domain means
  Vector translation;       // dim
};

/// Balanced Gaussian mixture for the source; the target pool is the same
/// mixture pushed through a planar rotation followed by a translation.
DomainPair generate_domain_pair(const DomainPairSpec& spec, Rng& rng);

/// Per-class counts for a balanced draw of n over K classes; the remainder goes
/// to the lowest class indices.
std::vector<std::size_t> balanced_counts(std::size_t n, std::size_t classes);

/// Reads `label,f0,f1,...`. An all-empty label column means unlabeled. When
/// num_classes is not given it is inferred as max label + 2 (known classes
/// plus the unknown class). Errors cite the 1-based line number.
FeatureDataset load_feature_csv(const std::filesystem::path& path, Domain domain,
                                std::optional<std::size_t> num_classes = std::nullopt);

/// Writes with shortest round-trip formatting, so loading restores X exactly.
void save_feature_csv(const FeatureDataset& ds, const std::filesystem::path& path);

}  // namespace lada
