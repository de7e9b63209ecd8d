#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/rng.hpp"

namespace knnlab {

enum class Geometry { sphere, ball };
enum class CorruptionMode { none, random, adversarial };

inline std::string to_string(CorruptionMode m) {
  switch (m) {
    case CorruptionMode::none: return "none";
    case CorruptionMode::random: return "random";
    case CorruptionMode::adversarial: return "adversarial";
  }
  return "none";
}

inline std::string to_string(Geometry g) { return g == Geometry::sphere ? "sphere" : "ball"; }

/// Test-time corruption: radius omega in an L_p geometry.
struct CorruptionSpec {
  double omega = 0.0;
  double norm_p = 2.0;  // >= 1, or infinity
  Geometry geometry = Geometry::sphere;
  CorruptionMode mode = CorruptionMode::none;

  void validate() const {
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
      throw InputError("CorruptionSpec: omega must be finite and non-negative");
    }
    if (!(norm_p >= 1.0)) throw InputError("CorruptionSpec: norm_p must be >= 1");
  }

  bool is_l2() const noexcept { return norm_p == 2.0; }
};

inline double lp_norm(std::span<const double> v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  if (p == 2.0) return detail::norm2(v);
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

/// Writes a draw of norm 1 (sphere) or at most 1 (ball) in L_p into `out`.
/// Directions follow the cone measure: normalized generalized-Gaussian draws
/// with density proportional to exp(-|t|^p); for p = 2 this is the uniform
/// surface measure. Ball draws scale the direction by U^{1/d}.
inline void sample_unit_offset(double p, Geometry geometry, RngHandle& rng, std::span<double> out) {
  const std::size_t d = out.size();
  double norm = 0.0;
  do {
    if (p == 2.0) {
      for (auto& v : out) v = rng.normal();
    } else if (std::isinf(p)) {
      for (auto& v : out) v = 2.0 * rng.uniform() - 1.0;
    } else {
      for (auto& v : out) {
        const double mag = std::pow(rng.gamma(1.0 / p), 1.0 / p);
        v = rng.uniform() < 0.5 ? -mag : mag;
      }
    }
    norm = lp_norm(out, p);
  } while (!(norm > 0.0));
  double scale = 1.0 / norm;
  if (geometry == Geometry::ball) scale *= std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  for (auto& v : out) v *= scale;
}

/// E[u_i^2] for one coordinate of a unit offset; multiply by omega^2 to get
/// E[(eps . v)^2] / |v|^2 for any fixed direction v.
inline double unit_offset_coordinate_moment(std::size_t d, double p, Geometry geometry) {
  const double dd = static_cast<double>(d);
  double sphere = 0.0;
  if (std::isinf(p)) {
    sphere = (dd + 2.0) / (3.0 * dd);
  } else {
    sphere = std::exp(std::lgamma(3.0 / p) + std::lgamma(dd / p) - std::lgamma(1.0 / p) -
                      std::lgamma((dd + 2.0) / p));
  }
  return geometry == Geometry::ball ? sphere * dd / (dd + 2.0) : sphere;
}

/// Random perturbation of x per spec; mode must be random.
inline Point perturb(std::span<const double> x, const CorruptionSpec& spec, RngHandle& rng) {
  if (spec.mode != CorruptionMode::random) throw MisuseError("perturb: mode must be random");
  spec.validate();
  std::vector<double> out(x.size());
  sample_unit_offset(spec.norm_p, spec.geometry, rng, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + spec.omega * out[i];
  return Point(std::move(out));
}

struct AttackResult {
  Point point;
  bool stationary = false;  // gradient vanished at x; x returned unchanged
};

/// White-box L2 attack against the true eta: push eta toward the other side
/// of 1/2 within the closed ball B(x, omega). Starts from the first-order point
/// x -/+ omega * grad/|grad| and refines with projected normalized-gradient
/// steps of length omega / refine_steps, keeping the best iterate.
inline AttackResult attack(std::span<const double> x, const Model& model, double omega,
                           std::size_t refine_steps = 0) {
  detail::require_dimension(x.size(), model.dimension(), "attack");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw InputError("attack: omega must be >= 0");
  Point origin(x);
  if (omega == 0.0) return {origin, false};

  const bool minimize = model.eta(x) > 0.5;
  const double sign = minimize ? -1.0 : 1.0;
  auto g = model.eta_grad(x);
  const double gnorm = detail::norm2(g);
  if (!(gnorm > 0.0)) return {origin, true};

  const std::size_t d = x.size();
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) z[i] = x[i] + sign * omega * g[i] / gnorm;
  std::vector<double> best = z;
  double best_eta = model.eta(z);

  const double step = refine_steps > 0 ? omega / static_cast<double>(refine_steps) : 0.0;
  std::vector<double> offset(d);
  for (std::size_t s = 0; s < refine_steps; ++s) {
    auto gz = model.eta_grad(z);
    const double n = detail::norm2(gz);
    if (!(n > 0.0)) break;
    for (std::size_t i = 0; i < d; ++i) {
      z[i] += sign * step * gz[i] / n;
      offset[i] = z[i] - x[i];
    }
    const double r = detail::norm2(offset);
    if (r > omega) {
      for (std::size_t i = 0; i < d; ++i) z[i] = x[i] + offset[i] * (omega / r);
    }
    const double e = model.eta(z);
    if (minimize ? e < best_eta : e > best_eta) {
      best_eta = e;
      best = z;
    }
  }
  return {Point(std::move(best)), false};
}

/// Perturbs every training point independently; labels are unchanged.
inline Dataset inject_noise(const Dataset& data, const CorruptionSpec& spec, RngHandle& rng) {
  if (spec.mode != CorruptionMode::random) throw MisuseError("inject_noise: mode must be random");
  spec.validate();
  const std::size_t d = data.dimension();
  std::vector<double> coords(data.coords().begin(), data.coords().end());
  std::vector<double> u(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    sample_unit_offset(spec.norm_p, spec.geometry, rng, u);
    for (std::size_t j = 0; j < d; ++j) coords[i * d + j] += spec.omega * u[j];
  }
  return data.with_coords(std::move(coords));
}

}  // namespace knnlab
