#include "lada/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "lada/error.hpp"

namespace lada {

std::string_view to_string(Domain domain) { return domain == Domain::Source ? "source" : "target"; }

void FeatureDataset::validate() const {
  if (!labels) return;
  if (labels->size() != size()) throw Error(ErrorKind::Shape, "label count differs from row count");
  for (int y : *labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw Error(ErrorKind::Bounds, "label " + std::to_string(y) + " outside the label space");
    }
  }
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> indices) const {
  FeatureDataset out;
  out.domain = domain;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  if (labels) out.labels.emplace();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw Error(ErrorKind::Bounds, "subset index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
    if (labels) out.labels->push_back((*labels)[indices[i]]);
  }
  return out;
}

FeatureDataset FeatureDataset::unlabeled() const {
  FeatureDataset out = *this;
  out.labels.reset();
  return out;
}

const std::vector<int>& FeatureDataset::require_labels() const {
  if (!labels) throw Error(ErrorKind::State, std::string(to_string(domain)) + " dataset has no labels");
  return *labels;
}

void DomainPairSpec::validate() const {
  if (classes < 2) throw Error(ErrorKind::Spec, "data.classes must be >= 2");
  if (dim < 2) {
    throw Error(ErrorKind::Spec, rotation != 0.0 ? "data.dim must be >= 2 for a planar rotation"
                                                 : "data.dim must be >= 2");
  }
  if (!(class_radius >= 0.0) || !(sigma >= 0.0) || !(translation >= 0.0)) {
    throw Error(ErrorKind::Spec, "radius, sigma and translation norms must be >= 0");
  }
  if (n_source == 0 || n_target_pool == 0) throw Error(ErrorKind::Spec, "dataset sizes must be positive");
}

std::vector<std::size_t> balanced_counts(std::size_t n, std::size_t classes) {
  std::vector<std::size_t> counts(classes, n / classes);
  for (std::size_t k = 0; k < n % classes; ++k) ++counts[k];
  return counts;
}

namespace {

Vector random_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

FeatureDataset draw_mixture(const Matrix& means, double sigma, std::size_t n, std::size_t num_classes,
                            Domain domain, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto counts = balanced_counts(n, static_cast<std::size_t>(means.rows()));
  FeatureDataset ds;
  ds.domain = domain;
  ds.num_classes = num_classes;
  ds.features.resize(static_cast<Eigen::Index>(n), means.cols());
  ds.labels.emplace();
  ds.labels->reserve(n);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t j = 0; j < counts[k]; ++j, ++row) {
      for (Eigen::Index c = 0; c < means.cols(); ++c) {
        ds.features(row, c) = means(static_cast<Eigen::Index>(k), c) + sigma * normal(rng);
      }
      ds.labels->push_back(static_cast<int>(k));
    }
  }
  return ds;
}

}  // namespace

DomainPair generate_domain_pair(const DomainPairSpec& spec, Rng& rng) {
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  const std::size_t num_classes = spec.classes + 1;

  DomainPair pair;
  pair.class_means.resize(static_cast<Eigen::Index>(spec.classes), dim);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    pair.class_means.row(static_cast<Eigen::Index>(k)) = spec.class_radius * random_direction(spec.dim, rng).transpose();
  }
  pair.translation = spec.translation * random_direction(spec.dim, rng);

  pair.source = draw_mixture(pair.class_means, spec.sigma, spec.n_source, num_classes, Domain::Source, rng);
  pair.target_pool =
      draw_mixture(pair.class_means, spec.sigma, spec.n_target_pool, num_classes, Domain::Target, rng);

  const double c = std::cos(spec.rotation);
  const double s = std::sin(spec.rotation);
  Matrix& x = pair.target_pool.features;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double a = x(i, 0);
    const double b = x(i, 1);
    x(i, 0) = c * a - s * b;
    x(i, 1) = s * a + c * b;
  }
  x.rowwise() += pair.translation.transpose();
  return pair;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

FeatureDataset load_feature_csv(const std::filesystem::path& path, Domain domain,
                                std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) parse_fail(path, line_no, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "label") parse_fail(path, line_no, "header must be label,f0,f1,...");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 1)) parse_fail(path, line_no, "unexpected header column");
  }
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  std::optional<bool> labeled;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != dim + 1) {
      parse_fail(path, line_no, "expected " + std::to_string(dim + 1) + " cells, found " + std::to_string(cells.size()));
    }
    const bool has_label = !cells[0].empty();
    if (labeled && *labeled != has_label) parse_fail(path, line_no, "mixed labeled and unlabeled rows");
    labeled = has_label;
    if (has_label) {
      int y = 0;
      const auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), y);
      if (res.ec != std::errc() || res.ptr != cells[0].data() + cells[0].size() || y < 0) {
        parse_fail(path, line_no, "label is not a non-negative integer");
      }
      labels.push_back(y);
    }
    for (std::size_t j = 1; j <= dim; ++j) {
      double v = 0.0;
      const auto cell = cells[j];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        parse_fail(path, line_no, "non-numeric cell in column f" + std::to_string(j - 1));
      }
      values.push_back(v);
    }
    ++rows;
  }

  FeatureDataset ds;
  ds.domain = domain;
  ds.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), ds.features.data());
  if (labeled.value_or(false)) {
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    ds.num_classes = num_classes.value_or(static_cast<std::size_t>(max_label) + 2);
    ds.labels = std::move(labels);
  } else {
    ds.num_classes = num_classes.value_or(0);
  }
  ds.validate();
  return ds;
}

void save_feature_csv(const FeatureDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::string buffer = "label";
  for (std::size_t j = 0; j < ds.dim(); ++j) buffer += ",f" + std::to_string(j);
  buffer += '\n';
  char num[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels) buffer += std::to_string((*ds.labels)[i]);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      buffer += ',';
      const auto res = std::to_chars(num, num + sizeof num, ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      buffer.append(num, res.ptr);
    }
    buffer += '\n';
  }
  out << buffer;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace lada
