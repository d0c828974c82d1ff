#include "lada/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "lada/error.hpp"

namespace lada::cli {

namespace {

constexpr std::uint64_t kDataStream = 0xda7a;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::Config, field + ": " + what);
}

double parse_double(const std::string& field, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad(field, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& field, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(field, "expected a non-negative integer, got '" + v + "'");
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& field, const std::string& value,
                                  const std::filesystem::path& base)>;
using Getter = std::function<std::optional<std::string>(const RunConfig&)>;

struct Key {
  std::string section;
  std::string name;
  Setter set;
  Getter get;
};

template <class T>
Key size_key(std::string section, std::string name, T RunConfig::*outer, std::size_t T::*field) {
  return {section, name,
          [=](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
            (c.*outer).*field = static_cast<std::size_t>(parse_u64(f, v));
          },
          [=](const RunConfig& c) -> std::optional<std::string> { return std::to_string((c.*outer).*field); }};
}

template <class T>
Key double_key(std::string section, std::string name, T RunConfig::*outer, double T::*field) {
  return {section, name,
          [=](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
            (c.*outer).*field = parse_double(f, v);
          },
          [=](const RunConfig& c) -> std::optional<std::string> { return format_double((c.*outer).*field); }};
}

Key path_key(std::string name, std::optional<std::filesystem::path> DataConfig::*field) {
  return {"data", name,
          [=](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& base) {
            std::filesystem::path p(v);
            if (p.is_relative()) p = base / p;
            c.data.*field = p.lexically_normal();
          },
          [=](const RunConfig& c) -> std::optional<std::string> {
            if (!(c.data.*field)) return std::nullopt;
            return (c.data.*field)->string();
          }};
}

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"", "seed",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.seed = parse_u64(f, v);
                 },
                 [](const RunConfig& c) -> std::optional<std::string> { return std::to_string(c.seed); }});

    k.push_back(path_key("source", &DataConfig::source));
    k.push_back(path_key("target", &DataConfig::target));
    using DS = DomainPairSpec;
    auto syn = [](RunConfig& c) -> DS& { return c.data.synthetic; };
    auto syn_size = [&](std::string name, std::size_t DS::*field) {
      k.push_back({"data", name,
                   [=](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                     syn(c).*field = static_cast<std::size_t>(parse_u64(f, v));
                   },
                   [=](const RunConfig& c) -> std::optional<std::string> {
                     return std::to_string(c.data.synthetic.*field);
                   }});
    };
    auto syn_double = [&](std::string name, double DS::*field) {
      k.push_back({"data", name,
                   [=](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                     syn(c).*field = parse_double(f, v);
                   },
                   [=](const RunConfig& c) -> std::optional<std::string> {
                     return format_double(c.data.synthetic.*field);
                   }});
    };
    syn_size("classes", &DS::classes);
    syn_size("dim", &DS::dim);
    syn_double("class_radius", &DS::class_radius);
    syn_double("sigma", &DS::sigma);
    syn_double("rotation", &DS::rotation);
    syn_double("translation", &DS::translation);
    syn_size("n_source", &DS::n_source);
    syn_size("n_target_pool", &DS::n_target_pool);

    k.push_back({"subset", "kappa",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.kappa = parse_double(f, v);
                 },
                 [](const RunConfig& c) -> std::optional<std::string> { return format_double(c.kappa); }});
    k.push_back(double_key("subset", "tol", &RunConfig::subset, &SubsetOptions::tol));
    k.push_back(size_key("subset", "min_total", &RunConfig::subset, &SubsetOptions::min_total));
    k.push_back(size_key("subset", "max_total", &RunConfig::subset, &SubsetOptions::max_total));
    k.push_back({"subset", "max_retries",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.subset.max_retries = static_cast<int>(parse_u64(f, v));
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return std::to_string(c.subset.max_retries);
                 }});

    k.push_back({"train", "variant",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   try {
                     c.train.variant = VariantSpec::parse(v);
                   } catch (const Error& e) {
                     bad(f, e.what());
                   }
                 },
                 [](const RunConfig& c) -> std::optional<std::string> { return c.train.variant.name(); }});
    using TC = TrainConfig;
    k.push_back(size_key("train", "source_batch", &RunConfig::train, &TC::source_batch));
    k.push_back(size_key("train", "target_batch", &RunConfig::train, &TC::target_batch));
    k.push_back(double_key("train", "learning_rate", &RunConfig::train, &TC::learning_rate));
    k.push_back(size_key("train", "stage1_iters", &RunConfig::train, &TC::stage1_iters));
    k.push_back(size_key("train", "stage2_iters", &RunConfig::train, &TC::stage2_iters));
    k.push_back(double_key("train", "dropout", &RunConfig::train, &TC::dropout));
    k.push_back({"train", "optimizer",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   try {
                     c.train.optimizer = parse_optimizer_kind(v);
                   } catch (const Error& e) {
                     bad(f, e.what());
                   }
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
                 }});
    k.push_back({"train", "warmup_iters",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   if (v == "auto") {
                     c.train.warmup_iters.reset();
                   } else {
                     c.train.warmup_iters = static_cast<std::size_t>(parse_u64(f, v));
                   }
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return c.train.warmup_iters ? std::to_string(*c.train.warmup_iters) : "auto";
                 }});
    k.push_back(size_key("train", "reestimate_every", &RunConfig::train, &TC::reestimate_every));
    k.push_back(size_key("train", "eval_every", &RunConfig::train, &TC::eval_every));
    k.push_back(size_key("train", "encoding_dim", &RunConfig::train, &TC::encoding_dim));
    k.push_back({"train", "generator_hidden",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.train.generator_hidden.clear();
                   for (const std::string& item : split_list(v)) {
                     c.train.generator_hidden.push_back(static_cast<std::size_t>(parse_u64(f, item)));
                   }
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return join<std::size_t>(c.train.generator_hidden, [](const std::size_t& x) { return std::to_string(x); });
                 }});

    k.push_back({"sweep", "kappas",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.sweep_kappas.clear();
                   for (const std::string& item : split_list(v)) c.sweep_kappas.push_back(parse_double(f, item));
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return join<double>(c.sweep_kappas, format_double);
                 }});
    k.push_back({"sweep", "variants",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.sweep_variants.clear();
                   for (const std::string& item : split_list(v)) {
                     try {
                       c.sweep_variants.push_back(VariantSpec::parse(item));
                     } catch (const Error& e) {
                       bad(f, e.what());
                     }
                   }
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return join<VariantSpec>(c.sweep_variants, [](const VariantSpec& s) { return s.name(); });
                 }});
    k.push_back({"sweep", "seeds",
                 [](RunConfig& c, const std::string& f, const std::string& v, const std::filesystem::path&) {
                   c.sweep_seeds.clear();
                   for (const std::string& item : split_list(v)) c.sweep_seeds.push_back(parse_u64(f, item));
                 },
                 [](const RunConfig& c) -> std::optional<std::string> {
                   return join<std::uint64_t>(c.resolved_sweep_seeds(),
                                              [](const std::uint64_t& s) { return std::to_string(s); });
                 }});
    return k;
  }();
  return keys;
}

std::string field_name(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::uint64_t> RunConfig::resolved_sweep_seeds() const {
  return sweep_seeds.empty() ? std::vector<std::uint64_t>{seed} : sweep_seeds;
}

IniDocument parse_ini(const std::string& text, const std::string& origin) {
  IniDocument doc;
  doc[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::Config, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw Error(ErrorKind::Config, where + ": empty section name");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::Config, where + ": empty key");
    auto [it, inserted] = doc[section].emplace(key, trim(line.substr(eq + 1)));
    if (!inserted) throw Error(ErrorKind::Config, where + ": duplicate key " + field_name(section, key));
  }
  return doc;
}

RunConfig config_from_ini(const IniDocument& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  for (const auto& [section, entries] : doc) {
    for (const auto& [key, value] : entries) {
      const std::string field = field_name(section, key);
      const auto& keys = schema();
      const auto it = std::find_if(keys.begin(), keys.end(),
                                   [&](const Key& k) { return k.section == section && k.name == key; });
      if (it == keys.end()) bad(field, "unknown key");
      it->set(cfg, field, value, base_dir);
    }
  }
  try {
    cfg.data.synthetic.validate();
  } catch (const Error& e) {
    bad("data", e.what());
  }
  cfg.train.validate();
  if (!(cfg.kappa >= 0.0)) bad("subset.kappa", "must be >= 0");
  if (!(cfg.subset.tol > 0.0)) bad("subset.tol", "must be > 0");
  return cfg;
}

nlohmann::json config_snapshot(const RunConfig& cfg) {
  nlohmann::json out = nlohmann::json::object();
  for (const Key& k : schema()) {
    const auto value = k.get(cfg);
    if (!value) continue;
    if (k.section.empty()) {
      out[k.name] = *value;
    } else {
      out[k.section][k.name] = *value;
    }
  }
  return out;
}

RunConfig config_from_snapshot(const nlohmann::json& snapshot) {
  if (!snapshot.is_object()) throw Error(ErrorKind::Config, "config snapshot must be an object");
  IniDocument doc;
  for (const auto& [key, value] : snapshot.items()) {
    if (value.is_object()) {
      for (const auto& [inner, v] : value.items()) {
        if (!v.is_string()) bad(field_name(key, inner), "expected a string value");
        doc[key][inner] = v.get<std::string>();
      }
    } else if (value.is_string()) {
      doc[""][key] = value.get<std::string>();
    } else {
      bad(key, "expected a string value");
    }
  }
  return config_from_ini(doc, std::filesystem::current_path());
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    if (!manifest.contains("config")) throw Error(ErrorKind::Config, path.string() + ": manifest has no config");
    return config_from_snapshot(manifest.at("config"));
  }
  return config_from_ini(parse_ini(text, path.string()), path.parent_path());
}

LoadedData load_data(const RunConfig& cfg) {
  if (cfg.data.source || cfg.data.target) {
    if (!cfg.data.source) bad("data.source", "required when data.target is set");
    if (!cfg.data.target) bad("data.target", "required when data.source is set");
    if (!std::filesystem::exists(*cfg.data.source)) bad("data.source", "no such file " + cfg.data.source->string());
    if (!std::filesystem::exists(*cfg.data.target)) bad("data.target", "no such file " + cfg.data.target->string());
    LoadedData d{load_feature_csv(*cfg.data.source, Domain::Source),
                 load_feature_csv(*cfg.data.target, Domain::Target)};
    const std::size_t k = std::max(d.source.num_classes, d.target_pool.num_classes);
    d.source.num_classes = k;
    d.target_pool.num_classes = k;
    d.source.require_labels();
    d.target_pool.require_labels();
    return d;
  }
  Rng rng(mix_seed(cfg.seed, kDataStream));
  DomainPair pair = generate_domain_pair(cfg.data.synthetic, rng);
  return {std::move(pair.source), std::move(pair.target_pool)};
}

}  // namespace lada::cli
