#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/rng.hpp"

namespace knnlab::lab {

enum class LabelRuleKind { binary, threshold };

/// binary: the label cell must read 0 or 1.
/// threshold: label = 1 iff value + offset > threshold.
struct LabelRule {
  LabelRuleKind kind = LabelRuleKind::binary;
  double offset = 0.0;
  double threshold = 0.5;

  Label apply(double value) const {
    if (kind == LabelRuleKind::threshold) return value + offset > threshold ? 1 : 0;
    if (value == 0.0) return 0;
    if (value == 1.0) return 1;
    throw InputError("binary label rule: value is neither 0 nor 1");
  }
};

// Abalone: age = rings + 1.5, positive iff older than 10.5 years.
inline LabelRule abalone_age_rule() { return {LabelRuleKind::threshold, 1.5, 10.5}; }

struct CsvSchema {
  std::vector<std::string> feature_columns;  // empty: every column except the label
  std::string label_column;                  // empty: last column
  std::optional<LabelRule> label_rule;
  bool has_header = true;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses CSV text. Rows and columns in errors are 1-based file coordinates.
inline Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  if (!schema.label_rule) throw ConfigError("load_csv: no label rule configured");
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header;
  if (schema.has_header) {
    if (!std::getline(in, line)) throw ParseError("load_csv: missing header", 1, 1);
    ++row;
    for (auto f : detail::split_fields(line)) header.emplace_back(f);
  }

  std::vector<std::size_t> feature_cols;
  std::size_t label_col = 0;
  bool resolved = false;
  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("load_csv: no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  auto resolve = [&](std::size_t width) {
    if (!schema.label_column.empty()) {
      label_col = column_of(schema.label_column);
    } else {
      label_col = width - 1;
    }
    if (!schema.feature_columns.empty()) {
      for (const auto& name : schema.feature_columns) feature_cols.push_back(column_of(name));
    } else {
      for (std::size_t c = 0; c < width; ++c) {
        if (c != label_col) feature_cols.push_back(c);
      }
    }
    if (feature_cols.empty()) throw ConfigError("load_csv: no feature columns");
    resolved = true;
  };
  if (schema.has_header) resolve(header.size());

  std::vector<double> coords;
  std::vector<Label> labels;
  std::size_t width = header.size();
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (!resolved) {
      width = fields.size();
      resolve(width);
    }
    if (fields.size() != width) {
      throw ParseError("load_csv: expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       row, std::min(fields.size(), width) + 1);
    }
    for (std::size_t c : feature_cols) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) throw ParseError("load_csv: non-numeric cell '" + std::string(fields[c]) + "'", row, c + 1);
      coords.push_back(*v);
    }
    const auto lv = detail::parse_double(fields[label_col]);
    if (!lv) {
      throw ParseError("load_csv: non-numeric label '" + std::string(fields[label_col]) + "'", row,
                       label_col + 1);
    }
    try {
      labels.push_back(schema.label_rule->apply(*lv));
    } catch (const InputError& e) {
      throw ParseError(std::string("load_csv: ") + e.what(), row, label_col + 1);
    }
  }
  if (labels.empty()) throw ParseError("load_csv: no data rows", row + 1, 1);
  return Dataset(feature_cols.size(), std::move(coords), std::move(labels));
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("load_csv: cannot open " + path);
  return parse_csv(in, schema);
}

struct Split {
  Dataset train;
  Dataset test;
};

/// Random split; the test part holds round(n * test_fraction) points, at least
/// one and leaving at least one for training. Index order is kept in each part.
inline Split split(const Dataset& data, double test_fraction, RngHandle& rng) {
  const std::size_t n = data.size();
  if (n < 2) throw InputError("split: need at least 2 points");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("split: test_fraction must be in (0,1)");
  const auto n_test = static_cast<std::size_t>(
      std::clamp<double>(std::round(test_fraction * static_cast<double>(n)), 1.0, static_cast<double>(n - 1)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(test)};
}

/// Per-attribute min-max scaling fit on one dataset.
struct MinMaxScaler {
  std::vector<double> lower;
  std::vector<double> upper;

  static MinMaxScaler fit(const Dataset& data) {
    const std::size_t d = data.dimension();
    MinMaxScaler s{std::vector<double>(d, INFINITY), std::vector<double>(d, -INFINITY)};
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto x = data.point(i);
      for (std::size_t j = 0; j < d; ++j) {
        s.lower[j] = std::min(s.lower[j], x[j]);
        s.upper[j] = std::max(s.upper[j], x[j]);
      }
    }
    return s;
  }

  // Constant attributes map to 0.
  Dataset transform(const Dataset& data) const {
    const std::size_t d = data.dimension();
    ::knnlab::detail::require_dimension(d, lower.size(), "MinMaxScaler");
    std::vector<double> coords(data.coords().begin(), data.coords().end());
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double range = upper[j] - lower[j];
        double& v = coords[i * d + j];
        v = range > 0.0 ? (v - lower[j]) / range : 0.0;
      }
    }
    return data.with_coords(std::move(coords));
  }
};

/// Split, then normalize both parts with a scaler fit on the training part.
inline Split split_normalized(const Dataset& data, double test_fraction, RngHandle& rng) {
  auto s = split(data, test_fraction, rng);
  const auto scaler = MinMaxScaler::fit(s.train);
  return {scaler.transform(s.train), scaler.transform(s.test)};
}

}  // namespace knnlab::lab
