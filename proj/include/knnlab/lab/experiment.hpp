#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "knnlab/corruption.hpp"
#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/lab/csv_data.hpp"
#include "knnlab/lab/cv.hpp"
#include "knnlab/lab/parallel.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"
#include "knnlab/theory.hpp"
#include "knnlab/variants.hpp"

namespace knnlab::lab {

enum class VariantKind { knn, knn_noise_injected, pre1nn, distributed };

struct Variant {
  VariantKind kind = VariantKind::knn;
  std::size_t shards = 1;  // distributed only

  static Variant knn() { return {}; }
  static Variant noise_injected() { return {VariantKind::knn_noise_injected, 1}; }
  static Variant pre1nn() { return {VariantKind::pre1nn, 1}; }
  static Variant distributed(std::size_t s) { return {VariantKind::distributed, s}; }

  std::string name() const {
    switch (kind) {
      case VariantKind::knn: return "knn";
      case VariantKind::knn_noise_injected: return "knn_noise_injected";
      case VariantKind::pre1nn: return "pre1nn";
      case VariantKind::distributed: return "distributed(" + std::to_string(shards) + ")";
    }
    return "knn";
  }

  static Variant parse(std::string_view s) {
    if (s == "knn") return knn();
    if (s == "knn_noise_injected") return noise_injected();
    if (s == "pre1nn") return pre1nn();
    if (s.starts_with("distributed(") && s.ends_with(")")) {
      const auto inner = s.substr(12, s.size() - 13);
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), v);
      if (ec == std::errc{} && p == inner.data() + inner.size() && v >= 1) return distributed(v);
    }
    throw ConfigError("unknown variant '" + std::string(s) + "'");
  }

  bool operator==(const Variant&) const = default;
};

enum class KRuleKind { fixed, cv, optimal_formula };

struct KRule {
  KRuleKind kind = KRuleKind::cv;
  std::size_t k = 1;      // fixed only
  std::size_t folds = 5;  // cv only

  static KRule fixed(std::size_t k) { return {KRuleKind::fixed, k, 5}; }
  static KRule cv(std::size_t folds = 5) { return {KRuleKind::cv, 1, folds}; }
  static KRule optimal() { return {KRuleKind::optimal_formula, 1, 5}; }

  std::string name() const {
    switch (kind) {
      case KRuleKind::fixed: return "fixed(" + std::to_string(k) + ")";
      case KRuleKind::cv: return "cv" + std::to_string(folds);
      case KRuleKind::optimal_formula: return "optimal_formula";
    }
    return "cv5";
  }

  // "fixed(K)", "K", "cvF", "optimal_formula"
  static KRule parse(std::string_view s) {
    auto number = [&](std::string_view t) -> std::optional<std::size_t> {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc{} || p != t.data() + t.size()) return std::nullopt;
      return v;
    };
    if (s == "optimal_formula" || s == "optimal") return optimal();
    if (s.starts_with("cv")) {
      if (auto f = number(s.substr(2)); f && *f >= 2) return cv(*f);
    }
    if (s.starts_with("fixed(") && s.ends_with(")")) {
      if (auto k = number(s.substr(6, s.size() - 7)); k && *k >= 1) return fixed(*k);
    }
    if (auto k = number(s); k && *k >= 1) return fixed(*k);
    throw ConfigError("unknown k rule '" + std::string(s) + "'");
  }
};

/// One experiment: every (variant, n, omega) cell, `reps` replications each.
/// Synthetic runs draw fresh training and test sets per (rep, n); real-data
/// runs use one fixed train/test split and subsample n training points per rep.
struct ExperimentSpec {
  std::string experiment_id = "experiment";
  std::shared_ptr<const Model> model;
  std::shared_ptr<const Dataset> dataset;
  std::vector<std::size_t> n_grid;
  std::vector<double> omega_grid{0.0};
  CorruptionSpec corruption{0.0, 2.0, Geometry::sphere, CorruptionMode::random};
  std::vector<Variant> variants{Variant::knn()};
  std::size_t reps = 1;
  std::size_t test_size = 1000;
  KRule k_rule;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
  std::size_t attack_steps = 0;
  double test_fraction = 0.25;  // real data only

  bool synthetic() const noexcept { return model != nullptr; }
  std::size_t dimension() const { return synthetic() ? model->dimension() : dataset->dimension(); }
  std::string metric() const { return synthetic() ? "regret" : "error_rate"; }

  void validate() const {
    if ((model == nullptr) == (dataset == nullptr)) {
      throw InputError("ExperimentSpec: exactly one of model and dataset must be set");
    }
    if (reps < 1) throw InputError("ExperimentSpec: reps must be >= 1");
    if (test_size < 1) throw InputError("ExperimentSpec: test_size must be >= 1");
    if (n_grid.empty() || omega_grid.empty() || variants.empty()) {
      throw InputError("ExperimentSpec: n grid, omega grid and variants must be non-empty");
    }
    CorruptionSpec c = corruption;
    for (double w : omega_grid) {
      c.omega = w;
      c.validate();
      if (c.mode == CorruptionMode::none && w != 0.0) {
        throw InputError("ExperimentSpec: corruption mode none requires omega = 0");
      }
    }
    if (corruption.mode == CorruptionMode::adversarial) {
      if (!synthetic()) throw InputError("ExperimentSpec: adversarial corruption needs a model");
      if (!corruption.is_l2()) throw InputError("ExperimentSpec: adversarial corruption is L2 only");
    }
    if (k_rule.kind == KRuleKind::cv && k_rule.folds < 2) throw InputError("ExperimentSpec: folds must be >= 2");
    if (k_rule.kind == KRuleKind::fixed && k_rule.k < 1) throw InputError("ExperimentSpec: k must be >= 1");
    const std::size_t n_cap = synthetic() ? SIZE_MAX : real_train_size();
    for (std::size_t n : n_grid) {
      if (n < 2) throw InputError("ExperimentSpec: n must be >= 2");
      if (n > n_cap) throw InputError("ExperimentSpec: n exceeds the training split");
    }
  }

  std::size_t real_train_size() const {
    const std::size_t n = dataset->size();
    const auto n_test = static_cast<std::size_t>(std::clamp<double>(
        std::round(test_fraction * static_cast<double>(n)), 1.0, static_cast<double>(n > 1 ? n - 1 : 1)));
    return n - n_test;
  }
};

struct RegretEstimate {
  double mean_regret = 0.0;  // error rate on real data
  double std_error = 0.0;
  double mean_error_rate = 0.0;
  std::size_t reps = 0;
  std::size_t k_used = 0;  // lower median over reps
  std::string metric = "regret";
};

struct RepRecord {
  std::size_t k = 0;
  double value = 0.0;       // regret, or error rate on real data
  double error_rate = 0.0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<RepRecord> records;  // ordered by (variant, n, omega, rep)

  std::size_t slot(std::size_t v, std::size_t a, std::size_t b, std::size_t r) const {
    return ((v * spec.n_grid.size() + a) * spec.omega_grid.size() + b) * spec.reps + r;
  }
  const RepRecord& record(std::size_t v, std::size_t a, std::size_t b, std::size_t r) const {
    return records[slot(v, a, b, r)];
  }

  std::vector<double> values(std::size_t v, std::size_t a, std::size_t b) const {
    std::vector<double> out(spec.reps);
    for (std::size_t r = 0; r < spec.reps; ++r) out[r] = record(v, a, b, r).value;
    return out;
  }

  RegretEstimate estimate(std::size_t v, std::size_t a, std::size_t b) const {
    RegretEstimate e;
    e.reps = spec.reps;
    e.metric = spec.metric();
    std::vector<std::size_t> ks(spec.reps);
    double sum = 0.0, err = 0.0;
    for (std::size_t r = 0; r < spec.reps; ++r) {
      const auto& rec = record(v, a, b, r);
      sum += rec.value;
      err += rec.error_rate;
      ks[r] = rec.k;
    }
    const double m = static_cast<double>(spec.reps);
    e.mean_regret = sum / m;
    e.mean_error_rate = err / m;
    if (spec.reps > 1) {
      double ss = 0.0;
      for (std::size_t r = 0; r < spec.reps; ++r) {
        const double dv = record(v, a, b, r).value - e.mean_regret;
        ss += dv * dv;
      }
      e.std_error = std::sqrt(ss / (m - 1.0) / m);
    }
    std::sort(ks.begin(), ks.end());
    e.k_used = ks[(ks.size() - 1) / 2];
    return e;
  }
};

namespace detail {

// Stream roles inside one (rep, n) task.
enum : std::uint64_t {
  kTrainStream = 1,
  kTestStream = 2,
  kOffsetStream = 3,
  kCvStream = 4,
  kSubsampleStream = 5,
  kPartitionStream = 6,
  kInjectStream = 7,
  kSplitStream = 8,
};

struct TestSet {
  std::size_t d = 0;
  std::vector<double> clean;    // size * d
  std::vector<double> offsets;  // unit offsets, random mode only
  std::vector<double> eta;      // synthetic only
  std::vector<Label> labels;    // real data only
  std::size_t size() const { return d == 0 ? 0 : clean.size() / d; }
  std::span<const double> point(std::size_t i) const { return {clean.data() + i * d, d}; }
};

// Corrupted copies of the test points at one omega.
inline std::vector<double> corrupt_tests(const TestSet& t, const ExperimentSpec& spec, double omega) {
  if (omega == 0.0 || spec.corruption.mode == CorruptionMode::none) return t.clean;
  std::vector<double> out(t.clean.size());
  if (spec.corruption.mode == CorruptionMode::random) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.clean[i] + omega * t.offsets[i];
    return out;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto z = attack(t.point(i), *spec.model, omega, spec.attack_steps);
    std::copy(z.point.coords().begin(), z.point.coords().end(), out.begin() + static_cast<std::ptrdiff_t>(i * t.d));
  }
  return out;
}

template <class Classify>
RepRecord score(const TestSet& t, const std::vector<double>& corrupted, const ExperimentSpec& spec, std::size_t k,
                Classify&& classify) {
  RepRecord rec;
  rec.k = k;
  double regret = 0.0, error = 0.0;
  const std::size_t m = t.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Label pred = classify(std::span<const double>(corrupted.data() + i * t.d, t.d));
    if (spec.synthetic()) {
      // Conditional expectation over Y given the test point.
      const double e = t.eta[i];
      error += pred == 1 ? 1.0 - e : e;
      if (pred != (e > 0.5 ? 1 : 0)) regret += std::abs(2.0 * e - 1.0);
    } else {
      error += pred != t.labels[i] ? 1.0 : 0.0;
    }
  }
  rec.error_rate = error / static_cast<double>(m);
  rec.value = spec.synthetic() ? regret / static_cast<double>(m) : rec.error_rate;
  return rec;
}

inline std::size_t choose_k(const Dataset& train, bool pre1nn, const ExperimentSpec& spec, const RngHandle& cv_rng) {
  const std::size_t n = train.size();
  const std::size_t k_max = pre1nn ? n - 1 : n;
  switch (spec.k_rule.kind) {
    case KRuleKind::fixed:
      if (spec.k_rule.k > k_max) {
        throw InputError("k = " + std::to_string(spec.k_rule.k) + " is invalid for n = " + std::to_string(n));
      }
      return spec.k_rule.k;
    case KRuleKind::optimal_formula:
      return std::clamp<std::size_t>(optimal_k(n, train.dimension(), 0.0), 1, k_max);
    case KRuleKind::cv: {
      RngHandle rng = cv_rng;
      return pre1nn ? cross_validate_k_pre1nn(train, spec.k_rule.folds, rng).k_hat
                    : cross_validate_k(train, spec.k_rule.folds, rng).k_hat;
    }
  }
  return 1;
}

struct RealSplit {
  Dataset train;
  Dataset test;
};

// All variants and omegas of one (rep, n) pair; writes into the result slots.
inline void run_task(const ExperimentSpec& spec, const std::optional<RealSplit>& real, std::size_t a,
                     std::size_t rep, std::vector<RepRecord>& out, const ExperimentResult& layout) {
  const std::size_t n = spec.n_grid[a];
  const std::size_t d = spec.dimension();
  const RngHandle base(spec.master_seed, mix_stream({n, rep}));

  std::optional<Dataset> train_storage;
  TestSet tests;
  tests.d = d;
  if (spec.synthetic()) {
    RngHandle train_rng = base.substream(kTrainStream);
    train_storage = sample_dataset(*spec.model, n, train_rng);
    RngHandle test_rng = base.substream(kTestStream);
    tests.clean.resize(spec.test_size * d);
    tests.eta.resize(spec.test_size);
    for (std::size_t i = 0; i < spec.test_size; ++i) {
      std::span<double> x(tests.clean.data() + i * d, d);
      spec.model->sample_features(test_rng, x);
      tests.eta[i] = spec.model->eta(x);
    }
  } else {
    RngHandle sub_rng = base.substream(kSubsampleStream);
    std::vector<std::size_t> perm(real->train.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), sub_rng.engine());
    perm.resize(n);
    std::sort(perm.begin(), perm.end());
    train_storage = real->train.subset(perm);
    const std::size_t m = std::min(spec.test_size, real->test.size());
    std::vector<std::size_t> tperm(real->test.size());
    std::iota(tperm.begin(), tperm.end(), std::size_t{0});
    std::shuffle(tperm.begin(), tperm.end(), sub_rng.engine());
    tperm.resize(m);
    std::sort(tperm.begin(), tperm.end());
    const Dataset t = real->test.subset(tperm);
    tests.clean.assign(t.coords().begin(), t.coords().end());
    tests.labels.assign(t.labels().begin(), t.labels().end());
  }
  const Dataset& train = *train_storage;
  if (spec.corruption.mode == CorruptionMode::random) {
    RngHandle off_rng = base.substream(kOffsetStream);
    tests.offsets.resize(tests.clean.size());
    for (std::size_t i = 0; i < tests.size(); ++i) {
      sample_unit_offset(spec.corruption.norm_p, spec.corruption.geometry, off_rng,
                         std::span<double>(tests.offsets.data() + i * d, d));
    }
  }

  std::vector<std::vector<double>> corrupted(spec.omega_grid.size());
  for (std::size_t b = 0; b < spec.omega_grid.size(); ++b) corrupted[b] = corrupt_tests(tests, spec, spec.omega_grid[b]);

  const RngHandle cv_rng = base.substream(kCvStream);
  std::optional<std::size_t> knn_k;
  std::optional<SearchIndex> knn_index;
  auto plain_k = [&] {
    if (!knn_k) knn_k = choose_k(train, false, spec, cv_rng);
    return *knn_k;
  };

  for (std::size_t v = 0; v < spec.variants.size(); ++v) {
    const Variant& var = spec.variants[v];
    for (std::size_t b = 0; b < spec.omega_grid.size(); ++b) {
      RepRecord& slot = out[layout.slot(v, a, b, rep)];
      const auto& xs = corrupted[b];
      switch (var.kind) {
        case VariantKind::knn: {
          const std::size_t k = plain_k();
          if (!knn_index) knn_index.emplace(train);
          slot = score(tests, xs, spec, k, [&](auto x) { return vote(knn_index->positive_count(x, k), k); });
          break;
        }
        case VariantKind::knn_noise_injected: {
          CorruptionSpec c = spec.corruption;
          c.mode = CorruptionMode::random;
          c.omega = spec.omega_grid[b];
          RngHandle inj_rng = base.substream(kInjectStream);
          const NoiseInjectedKnn model(inject_noise(train, c, inj_rng));
          const std::size_t k = choose_k(model.data, false, spec, cv_rng);
          slot = score(tests, xs, spec, k, [&](auto x) { return vote(model.index.positive_count(x, k), k); });
          break;
        }
        case VariantKind::pre1nn: {
          const std::size_t k = choose_k(train, true, spec, cv_rng);
          if (!knn_index) knn_index.emplace(train);
          const RelabeledDataset relabeled = preprocess(train, k, *knn_index);
          slot = score(tests, xs, spec, k, [&](auto x) { return pre1nn_classify(relabeled, x); });
          break;
        }
        case VariantKind::distributed: {
          // Data-driven k below s is raised to s; a fixed k must satisfy k >= s.
          std::size_t k = plain_k();
          if (spec.k_rule.kind != KRuleKind::fixed) k = std::max(k, var.shards);
          RngHandle part_rng = base.substream(mix_stream({kPartitionStream, var.shards}));
          const DistributedKnn dist(train, make_partition(n, var.shards, part_rng));
          slot = score(tests, xs, spec, dist.effective_k(k), [&](auto x) { return dist.classify(x, k); });
          break;
        }
      }
    }
  }
}

}  // namespace detail

/// Runs every cell. Per-rep streams are keyed by (master_seed, n, rep) plus a
/// role, never by omega or variant, so all omegas and variants of a rep see
/// the same training set, test points and unit offsets.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result{spec, {}};
  result.records.resize(spec.variants.size() * spec.n_grid.size() * spec.omega_grid.size() * spec.reps);
  std::optional<detail::RealSplit> real;
  if (!spec.synthetic()) {
    RngHandle split_rng(spec.master_seed, mix_stream({detail::kSplitStream}));
    auto s = split_normalized(*spec.dataset, spec.test_fraction, split_rng);
    real = detail::RealSplit{std::move(s.train), std::move(s.test)};
  }
  const std::size_t tasks = spec.reps * spec.n_grid.size();
  parallel_for(tasks, spec.threads, [&](std::size_t t) {
    detail::run_task(spec, real, t % spec.n_grid.size(), t / spec.n_grid.size(), result.records, result);
  });
  return result;
}

/// Single cell with a fixed k, using the first variant of the spec.
inline RegretEstimate estimate_regret(const ExperimentSpec& spec, std::size_t n, std::size_t k, double omega) {
  ExperimentSpec s = spec;
  s.n_grid = {n};
  s.omega_grid = {omega};
  s.k_rule = KRule::fixed(k);
  if (s.variants.empty()) throw InputError("estimate_regret: no variant");
  s.variants = {spec.variants.front()};
  return run_experiment(s).estimate(0, 0, 0);
}

/// Ratio of mean values with a delta-method standard error from paired reps.
struct PairedRatio {
  double ratio = 0.0;
  double std_error = 0.0;
};

inline PairedRatio paired_ratio(const std::vector<double>& num, const std::vector<double>& den) {
  if (num.size() != den.size() || num.empty()) throw InputError("paired_ratio: size mismatch");
  const double m = static_cast<double>(num.size());
  const double a = std::accumulate(num.begin(), num.end(), 0.0) / m;
  const double b = std::accumulate(den.begin(), den.end(), 0.0) / m;
  PairedRatio out;
  out.ratio = a / b;
  if (num.size() > 1) {
    double vaa = 0.0, vbb = 0.0, vab = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      vaa += (num[i] - a) * (num[i] - a);
      vbb += (den[i] - b) * (den[i] - b);
      vab += (num[i] - a) * (den[i] - b);
    }
    vaa /= m - 1.0;
    vbb /= m - 1.0;
    vab /= m - 1.0;
    const double r = out.ratio;
    const double var = (vaa + r * r * vbb - 2.0 * r * vab) / (b * b * m);
    out.std_error = std::sqrt(std::max(var, 0.0));
  }
  return out;
}

struct ScanRow {
  double omega = 0.0;
  RegretEstimate estimate;
  double ratio = 1.0;  // to the omega = 0 row
  double ratio_se = 0.0;
};

struct ScanResult {
  ExperimentResult result;
  std::vector<ScanRow> rows;
};

/// Regret across an omega grid at fixed n for the first variant of the spec.
inline ScanResult phase_transition_scan(const ExperimentSpec& spec, std::size_t n, std::vector<double> omega_grid) {
  const auto zero = std::find(omega_grid.begin(), omega_grid.end(), 0.0);
  if (zero == omega_grid.end()) throw InputError("phase_transition_scan: omega grid must include 0");
  const auto zero_index = static_cast<std::size_t>(zero - omega_grid.begin());
  ExperimentSpec s = spec;
  s.n_grid = {n};
  s.omega_grid = std::move(omega_grid);
  s.variants = {spec.variants.front()};
  ScanResult out{run_experiment(s), {}};
  const auto base = out.result.values(0, 0, zero_index);
  for (std::size_t b = 0; b < s.omega_grid.size(); ++b) {
    ScanRow row;
    row.omega = s.omega_grid[b];
    row.estimate = out.result.estimate(0, 0, b);
    if (b != zero_index) {
      const auto pr = paired_ratio(out.result.values(0, 0, b), base);
      row.ratio = pr.ratio;
      row.ratio_se = pr.std_error;
    }
    out.rows.push_back(row);
  }
  return out;
}

struct ComparisonRow {
  std::size_t variant = 0;
  std::size_t n = 0;
  double omega = 0.0;
  RegretEstimate estimate;
  double ratio = 1.0;  // to the first variant, same (n, omega)
  double ratio_se = 0.0;
};

struct ComparisonResult {
  ExperimentResult result;
  std::vector<ComparisonRow> rows;  // ordered by (variant, n, omega)
};

inline ComparisonResult compare_variants(const ExperimentSpec& spec) {
  ComparisonResult out{run_experiment(spec), {}};
  const auto& s = out.result.spec;
  for (std::size_t v = 0; v < s.variants.size(); ++v) {
    for (std::size_t a = 0; a < s.n_grid.size(); ++a) {
      for (std::size_t b = 0; b < s.omega_grid.size(); ++b) {
        ComparisonRow row{v, s.n_grid[a], s.omega_grid[b], out.result.estimate(v, a, b), 1.0, 0.0};
        if (v != 0) {
          const auto pr = paired_ratio(out.result.values(v, a, b), out.result.values(0, a, b));
          row.ratio = pr.ratio;
          row.ratio_se = pr.std_error;
        }
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

}  // namespace knnlab::lab
