#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/lab/csv_data.hpp"
#include "knnlab/lab/experiment.hpp"

namespace knnlab::lab {

using ConfigMap = std::map<std::string, std::string>;

/// Every recognized key; each is also a CLI flag of the same name.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "experiment_id", "model",      "d",           "exp_mean",        "data",       "features",
      "label",         "header",     "label_rule", "label_offset", "label_threshold", "test_fraction", "n_grid",
      "omega_grid",    "corruption_mode", "norm_p", "geometry",        "variants",   "reps",
      "test_size",     "k_rule",     "folds",       "seed",            "threads",    "attack_steps",
  };
  return keys;
}

/// `key = value` lines; `#` starts a comment; later keys override earlier ones.
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  std::size_t row = 0;
  const auto& keys = config_keys();
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("config: expected key = value", row, 1);
    const std::string key(detail::trim(body.substr(0, eq)));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(row));
    }
    out[key] = std::string(detail::trim(body.substr(eq + 1)));
  }
  return out;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  // Commas inside parentheses belong to the item, e.g. distributed(4).
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] == '(') ++depth;
    if (i < s.size() && s[i] == ')') --depth;
    if (i == s.size() || (s[i] == ',' && depth == 0)) {
      const auto item = detail::trim(s.substr(start, i - start));
      if (!item.empty()) out.emplace_back(item);
      start = i + 1;
    }
  }
  return out;
}

inline std::uint64_t parse_unsigned(std::string_view s, const std::string& key) {
  std::uint64_t v = 0;
  s = detail::trim(s);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline double parse_real(std::string_view s, const std::string& key) {
  s = detail::trim(s);
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  const auto v = detail::parse_double(s);
  if (!v) throw ConfigError(key + ": expected a number, got '" + std::string(s) + "'");
  return *v;
}

/// Items are integers, powers `2^a`, or power ranges `2^a..2^b`.
inline std::vector<std::size_t> parse_size_list(std::string_view s, const std::string& key = "n_grid") {
  auto power = [&](std::string_view t) -> std::size_t {
    t = detail::trim(t);
    if (t.starts_with("2^")) {
      const auto e = parse_unsigned(t.substr(2), key);
      if (e > 62) throw ConfigError(key + ": exponent too large");
      return std::size_t{1} << e;
    }
    return parse_unsigned(t, key);
  };
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(power(item));
      continue;
    }
    const std::string_view lo(item.data(), dots), hi(item.data() + dots + 2, item.size() - dots - 2);
    if (!detail::trim(lo).starts_with("2^") || !detail::trim(hi).starts_with("2^")) {
      throw ConfigError(key + ": ranges must be written 2^a..2^b");
    }
    for (std::size_t v = power(lo), end = power(hi); v <= end; v *= 2) out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline std::vector<double> parse_real_list(std::string_view s, const std::string& key = "omega_grid") {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_real(item, key));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline std::string get(const ConfigMap& c, const std::string& key, const std::string& fallback) {
  const auto it = c.find(key);
  return it == c.end() ? fallback : it->second;
}

inline std::shared_ptr<const Model> model_from_config(const ConfigMap& c) {
  const std::string name = get(c, "model", "exponential");
  if (name == "identity1d") return make_identity_unit_model();
  const std::size_t d = parse_unsigned(get(c, "d", "5"), "d");
  if (name == "exponential") {
    const double mean = parse_real(get(c, "exp_mean", "0.5"), "exp_mean");
    return std::make_shared<SyntheticModel>(SyntheticModel::exponential_benchmark(d, mean));
  }
  if (name == "uniform") return std::make_shared<SyntheticModel>(SyntheticModel::uniform_benchmark(d));
  throw ConfigError("model: unknown model '" + name + "'");
}

/// label_rule: binary | threshold | abalone (rings + 1.5 > 10.5).
inline CsvSchema schema_from_config(const ConfigMap& c) {
  CsvSchema schema;
  schema.feature_columns = split_list(get(c, "features", ""));
  schema.label_column = get(c, "label", "");
  const std::string header = get(c, "header", "true");
  if (header != "true" && header != "false") throw ConfigError("header: expected true or false");
  schema.has_header = header == "true";
  const std::string rule = get(c, "label_rule", "");
  if (rule == "binary") {
    schema.label_rule = LabelRule{};
  } else if (rule == "abalone") {
    schema.label_rule = abalone_age_rule();
  } else if (rule == "threshold") {
    schema.label_rule = LabelRule{LabelRuleKind::threshold, parse_real(get(c, "label_offset", "0"), "label_offset"),
                                  parse_real(get(c, "label_threshold", "0.5"), "label_threshold")};
  } else if (rule.empty()) {
    throw ConfigError("data: no label_rule configured");
  } else {
    throw ConfigError("label_rule: unknown rule '" + rule + "'");
  }
  return schema;
}

inline CorruptionMode parse_mode(const std::string& s) {
  if (s == "none") return CorruptionMode::none;
  if (s == "random") return CorruptionMode::random;
  if (s == "adversarial") return CorruptionMode::adversarial;
  throw ConfigError("corruption_mode: unknown mode '" + s + "'");
}

inline Geometry parse_geometry(const std::string& s) {
  if (s == "sphere") return Geometry::sphere;
  if (s == "ball") return Geometry::ball;
  throw ConfigError("geometry: unknown geometry '" + s + "'");
}

/// Builds and validates a spec. A `data` key selects a CSV source instead of
/// a model; without `n_grid` a real-data run uses the whole training split.
inline ExperimentSpec spec_from_config(const ConfigMap& c) {
  ExperimentSpec s;
  s.experiment_id = get(c, "experiment_id", "experiment");
  if (s.experiment_id.find_first_of(",\n\r") != std::string::npos) {
    throw ConfigError("experiment_id must not contain commas or line breaks");
  }
  s.test_fraction = parse_real(get(c, "test_fraction", "0.25"), "test_fraction");
  if (c.count("data")) {
    s.dataset = std::make_shared<const Dataset>(load_csv(c.at("data"), schema_from_config(c)));
  } else {
    s.model = model_from_config(c);
  }
  if (c.count("n_grid")) {
    s.n_grid = parse_size_list(c.at("n_grid"));
  } else if (s.dataset) {
    s.n_grid = {s.real_train_size()};
  } else {
    throw ConfigError("n_grid is required for model runs");
  }
  s.omega_grid = parse_real_list(get(c, "omega_grid", "0"));
  s.corruption.mode = parse_mode(get(c, "corruption_mode", "random"));
  s.corruption.norm_p = parse_real(get(c, "norm_p", "2"), "norm_p");
  s.corruption.geometry = parse_geometry(get(c, "geometry", "sphere"));
  s.variants.clear();
  for (const auto& v : split_list(get(c, "variants", "knn"))) s.variants.push_back(Variant::parse(v));
  s.reps = parse_unsigned(get(c, "reps", "1"), "reps");
  s.test_size = parse_unsigned(get(c, "test_size", "1000"), "test_size");
  s.k_rule = KRule::parse(get(c, "k_rule", "cv5"));
  if (c.count("folds")) s.k_rule.folds = parse_unsigned(c.at("folds"), "folds");
  s.master_seed = parse_unsigned(get(c, "seed", "0"), "seed");
  s.threads = parse_unsigned(get(c, "threads", "1"), "threads");
  s.attack_steps = parse_unsigned(get(c, "attack_steps", "0"), "attack_steps");
  try {
    s.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

}  // namespace knnlab::lab
