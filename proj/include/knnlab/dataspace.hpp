#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "knnlab/errors.hpp"
#include "knnlab/rng.hpp"

namespace knnlab {

using Label = std::uint8_t;

namespace detail {

inline void require_dimension(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InputError(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                     ", expected " + std::to_string(want) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

/// A finite point in R^d.
class Point {
 public:
  Point() = default;
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) { validate(); }
  Point(std::initializer_list<double> coords) : coords_(coords) { validate(); }
  explicit Point(std::span<const double> coords) : coords_(coords.begin(), coords.end()) {
    validate();
  }

  std::size_t dimension() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }
  operator std::span<const double>() const noexcept { return coords_; }
  const std::vector<double>& vector() const noexcept { return coords_; }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  void validate() const {
    if (coords_.empty()) throw InputError("Point: dimension must be at least 1");
    for (double v : coords_) {
      if (!std::isfinite(v)) throw InputError("Point: coordinates must be finite");
    }
  }

  std::vector<double> coords_;
};

struct LabeledSample {
  Point point;
  Label label = 0;
};

/// Immutable set of n labeled points sharing one dimension. Coordinates are
/// stored row-major in a single buffer.
class Dataset {
 public:
  Dataset(std::size_t dimension, std::vector<double> coords, std::vector<Label> labels)
      : dimension_(dimension), coords_(std::move(coords)), labels_(std::move(labels)) {
    if (dimension_ == 0) throw InputError("Dataset: dimension must be positive");
    if (labels_.empty()) throw InputError("Dataset: at least one sample required");
    if (coords_.size() != labels_.size() * dimension_) {
      throw InputError("Dataset: coordinate buffer does not match n * d");
    }
    for (double v : coords_) {
      if (!std::isfinite(v)) throw InputError("Dataset: coordinates must be finite");
    }
    for (Label y : labels_) {
      if (y > 1) throw InputError("Dataset: labels must be 0 or 1");
    }
  }

  static Dataset from_samples(std::span<const LabeledSample> samples) {
    if (samples.empty()) throw InputError("Dataset: at least one sample required");
    const std::size_t d = samples.front().point.dimension();
    std::vector<double> coords;
    std::vector<Label> labels;
    coords.reserve(samples.size() * d);
    labels.reserve(samples.size());
    for (const auto& s : samples) {
      detail::require_dimension(s.point.dimension(), d, "Dataset");
      coords.insert(coords.end(), s.point.coords().begin(), s.point.coords().end());
      labels.push_back(s.label);
    }
    return Dataset(d, std::move(coords), std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dimension_, dimension_};
  }
  Label label(std::size_t i) const { return labels_[i]; }
  LabeledSample sample(std::size_t i) const { return {Point(point(i)), label(i)}; }

  std::span<const double> coords() const noexcept { return coords_; }
  std::span<const Label> labels() const noexcept { return labels_; }

  // Same labels, new coordinates (noise injection, normalization).
  Dataset with_coords(std::vector<double> coords) const {
    return Dataset(dimension_, std::move(coords), labels_);
  }

  // Same coordinates, new labels (relabeling).
  Dataset with_labels(std::vector<Label> labels) const {
    return Dataset(dimension_, coords_, std::move(labels));
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<double> coords;
    std::vector<Label> labels;
    coords.reserve(indices.size() * dimension_);
    labels.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= size()) throw InputError("Dataset::subset: index out of range");
      auto p = point(i);
      coords.insert(coords.end(), p.begin(), p.end());
      labels.push_back(labels_[i]);
    }
    return Dataset(dimension_, std::move(coords), std::move(labels));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t dimension_;
  std::vector<double> coords_;
  std::vector<Label> labels_;
};

/// Dense d x d matrix, row-major.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> data;

  explicit SquareMatrix(std::size_t size = 0) : n(size), data(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

// Linear inequality coeffs . x <= bound.
struct LinearConstraint {
  std::vector<double> coeffs;
  double bound = 0.0;
};

/// Bounded region used for boundary quadrature: a finite box intersected with
/// linear constraints. For unbounded feature laws this is the truncated support.
struct IntegrationRegion {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LinearConstraint> constraints;

  bool contains(std::span<const double> x, double slack = 1e-12) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    }
    for (const auto& c : constraints) {
      if (detail::dot(c.coeffs, x) > c.bound + slack) return false;
    }
    return true;
  }
};

// The set {x : normal . x = offset}.
struct Hyperplane {
  std::vector<double> normal;
  double offset = 0.0;
};

/// Pluggable generative model: regression function eta(x) = P(Y=1 | X=x) with
/// analytic derivatives, and the feature density with its gradient.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t dimension() const = 0;
  virtual double eta(std::span<const double> x) const = 0;
  virtual std::vector<double> eta_grad(std::span<const double> x) const = 0;
  virtual SquareMatrix eta_hess(std::span<const double> x) const = 0;
  virtual double density(std::span<const double> x) const = 0;
  virtual std::vector<double> density_grad(std::span<const double> x) const = 0;
  virtual void sample_features(RngHandle& rng, std::span<double> out) const = 0;
  virtual IntegrationRegion integration_region() const = 0;

  // The level set {eta = 1/2} when it is a hyperplane; nullopt otherwise.
  virtual std::optional<Hyperplane> boundary_hyperplane() const { return std::nullopt; }

  virtual std::string name() const { return "model"; }
};

struct IidExponential {
  double mean = 0.5;
};
struct IidUniform {};
using FeatureLaw = std::variant<IidExponential, IidUniform>;

enum class OffsetRule {
  centered,  // w_i = i - d/2
  shifted,   // w_i = i - d/2 - 0.5
  custom,
};

// Density ratio below which the exponential support is truncated for integrals.
inline constexpr double kSupportTruncation = 1e-10;

/// Logistic model eta(x) = e^{x.w} / (e^{x.w} + e^{-x.w}) over an i.i.d.
/// feature law.
class SyntheticModel final : public Model {
 public:
  SyntheticModel(std::vector<double> weights, FeatureLaw law, OffsetRule rule = OffsetRule::custom)
      : weights_(std::move(weights)), law_(law), rule_(rule) {
    if (weights_.empty()) throw InputError("SyntheticModel: dimension must be at least 1");
    for (double w : weights_) {
      if (!std::isfinite(w)) throw InputError("SyntheticModel: weights must be finite");
    }
    if (const auto* e = std::get_if<IidExponential>(&law_); e && !(e->mean > 0.0)) {
      throw InputError("SyntheticModel: exponential mean must be positive");
    }
  }

  // Exponential features with mean `mean`, w_i = i - d/2.
  static SyntheticModel exponential_benchmark(std::size_t d, double mean = 0.5) {
    std::vector<double> w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = static_cast<double>(i + 1) - static_cast<double>(d) / 2.0;
    return SyntheticModel(std::move(w), IidExponential{mean}, OffsetRule::centered);
  }

  // Uniform(0,1) features, w_i = i - d/2 - 0.5.
  static SyntheticModel uniform_benchmark(std::size_t d) {
    std::vector<double> w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = static_cast<double>(i + 1) - static_cast<double>(d) / 2.0 - 0.5;
    return SyntheticModel(std::move(w), IidUniform{}, OffsetRule::shifted);
  }

  const std::vector<double>& weights() const noexcept { return weights_; }
  const FeatureLaw& feature_law() const noexcept { return law_; }
  OffsetRule offset_rule() const noexcept { return rule_; }

  std::size_t dimension() const override { return weights_.size(); }

  double eta(std::span<const double> x) const override {
    return logistic(2.0 * detail::dot(x, weights_));
  }

  // d eta / d s = 2 eta (1 - eta) with s = x.w.
  std::vector<double> eta_grad(std::span<const double> x) const override {
    const double e = eta(x);
    const double g = 2.0 * e * (1.0 - e);
    std::vector<double> out(weights_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g * weights_[i];
    return out;
  }

  SquareMatrix eta_hess(std::span<const double> x) const override {
    const double e = eta(x);
    const double c = 4.0 * e * (1.0 - e) * (1.0 - 2.0 * e);
    const std::size_t d = weights_.size();
    SquareMatrix h(d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) h(i, j) = c * weights_[i] * weights_[j];
    }
    return h;
  }

  double density(std::span<const double> x) const override {
    if (const auto* e = std::get_if<IidExponential>(&law_)) {
      const double rate = 1.0 / e->mean;
      double log_f = 0.0;
      for (double v : x) {
        if (v < 0.0) return 0.0;
        log_f += std::log(rate) - rate * v;
      }
      return std::exp(log_f);
    }
    for (double v : x) {
      if (v < 0.0 || v > 1.0) return 0.0;
    }
    return 1.0;
  }

  std::vector<double> density_grad(std::span<const double> x) const override {
    std::vector<double> out(x.size(), 0.0);
    if (const auto* e = std::get_if<IidExponential>(&law_)) {
      const double f = density(x);
      for (auto& g : out) g = -f / e->mean;
    }
    return out;
  }

  void sample_features(RngHandle& rng, std::span<double> out) const override {
    if (const auto* e = std::get_if<IidExponential>(&law_)) {
      for (auto& v : out) v = rng.exponential(1.0 / e->mean);
    } else {
      for (auto& v : out) v = rng.uniform();
    }
  }

  IntegrationRegion integration_region() const override {
    const std::size_t d = dimension();
    IntegrationRegion region;
    region.lower.assign(d, 0.0);
    if (const auto* e = std::get_if<IidExponential>(&law_)) {
      // f(x)/max f = exp(-sum x / mean) >= truncation  <=>  sum x <= cut
      const double cut = -std::log(kSupportTruncation) * e->mean;
      region.upper.assign(d, cut);
      region.constraints.push_back({std::vector<double>(d, 1.0), cut});
    } else {
      region.upper.assign(d, 1.0);
    }
    return region;
  }

  std::optional<Hyperplane> boundary_hyperplane() const override {
    return Hyperplane{weights_, 0.0};
  }

  std::string name() const override {
    return std::holds_alternative<IidExponential>(law_) ? "exponential" : "uniform";
  }

  // 1 / (1 + e^{-s}) without overflow for any finite s.
  static double logistic(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
  }

 private:
  std::vector<double> weights_;
  FeatureLaw law_;
  OffsetRule rule_;
};

/// Model assembled from callables; used for test doubles and custom studies.
class CallableModel final : public Model {
 public:
  struct Parts {
    std::size_t dimension = 1;
    std::function<double(std::span<const double>)> eta;
    std::function<std::vector<double>(std::span<const double>)> eta_grad;
    std::function<SquareMatrix(std::span<const double>)> eta_hess;
    std::function<double(std::span<const double>)> density;
    std::function<std::vector<double>(std::span<const double>)> density_grad;
    std::function<void(RngHandle&, std::span<double>)> sampler;
    IntegrationRegion region;
    std::optional<Hyperplane> boundary;
    std::string name = "callable";
  };

  explicit CallableModel(Parts parts) : parts_(std::move(parts)) {
    if (parts_.dimension == 0) throw InputError("CallableModel: dimension must be positive");
    if (!parts_.eta || !parts_.eta_grad || !parts_.eta_hess || !parts_.density ||
        !parts_.density_grad || !parts_.sampler) {
      throw InputError("CallableModel: every callable must be provided");
    }
  }

  std::size_t dimension() const override { return parts_.dimension; }
  double eta(std::span<const double> x) const override { return parts_.eta(x); }
  std::vector<double> eta_grad(std::span<const double> x) const override {
    return parts_.eta_grad(x);
  }
  SquareMatrix eta_hess(std::span<const double> x) const override { return parts_.eta_hess(x); }
  double density(std::span<const double> x) const override { return parts_.density(x); }
  std::vector<double> density_grad(std::span<const double> x) const override {
    return parts_.density_grad(x);
  }
  void sample_features(RngHandle& rng, std::span<double> out) const override {
    parts_.sampler(rng, out);
  }
  IntegrationRegion integration_region() const override { return parts_.region; }
  std::optional<Hyperplane> boundary_hyperplane() const override { return parts_.boundary; }
  std::string name() const override { return parts_.name; }

 private:
  Parts parts_;
};

/// X ~ Uniform(0,1), eta(x) = x (clamped to [0,1] outside the support).
/// Its regret decomposition has a closed form, so it anchors oracle checks.
inline std::shared_ptr<const Model> make_identity_unit_model() {
  CallableModel::Parts p;
  p.dimension = 1;
  p.eta = [](std::span<const double> x) { return std::clamp(x[0], 0.0, 1.0); };
  p.eta_grad = [](std::span<const double>) { return std::vector<double>{1.0}; };
  p.eta_hess = [](std::span<const double>) { return SquareMatrix(1); };
  p.density = [](std::span<const double> x) { return (x[0] >= 0.0 && x[0] <= 1.0) ? 1.0 : 0.0; };
  p.density_grad = [](std::span<const double>) { return std::vector<double>{0.0}; };
  p.sampler = [](RngHandle& rng, std::span<double> out) { out[0] = rng.uniform(); };
  p.region = IntegrationRegion{{0.0}, {1.0}, {}};
  p.boundary = Hyperplane{{1.0}, 0.5};
  p.name = "identity1d";
  return std::make_shared<CallableModel>(std::move(p));
}

// ---------------------------------------------------------------------------
// Free operations

inline double eta(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "eta");
  return model.eta(x);
}

inline std::vector<double> eta_grad(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "eta_grad");
  return model.eta_grad(x);
}

inline SquareMatrix eta_hess(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "eta_hess");
  return model.eta_hess(x);
}

inline double density(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "density");
  return model.density(x);
}

inline std::vector<double> density_grad(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "density_grad");
  return model.density_grad(x);
}

// Draws features for all n points first, then the labels, from one stream.
inline Dataset sample_dataset(const Model& model, std::size_t n, RngHandle& rng) {
  if (n == 0) throw InputError("sample_dataset: n must be positive");
  const std::size_t d = model.dimension();
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    model.sample_features(rng, std::span<double>(coords.data() + i * d, d));
  }
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(model.eta(std::span<const double>(coords.data() + i * d, d))) ? 1 : 0;
  }
  return Dataset(d, std::move(coords), std::move(labels));
}

inline Label bayes_label(const Model& model, std::span<const double> x) {
  return eta(model, x) > 0.5 ? 1 : 0;
}

struct MonteCarloValue {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// E[min(eta(X), 1 - eta(X))] by Monte Carlo over the feature law.
inline MonteCarloValue bayes_risk(const Model& model, std::size_t n_mc, RngHandle& rng) {
  if (n_mc == 0) throw InputError("bayes_risk: n_mc must be positive");
  std::vector<double> x(model.dimension());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    model.sample_features(rng, x);
    const double e = model.eta(x);
    const double r = std::min(e, 1.0 - e);
    sum += r;
    sum_sq += r * r;
  }
  const double nn = static_cast<double>(n_mc);
  const double mean = sum / nn;
  const double var = n_mc > 1 ? std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
  return {mean, std::sqrt(var / nn), n_mc};
}

}  // namespace knnlab
