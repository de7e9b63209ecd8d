#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knnlab/corruption.hpp"
#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"

namespace knnlab {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t m) {
  if (m == 0) throw InputError("gauss_legendre: need at least one node");
  std::vector<double> nodes(m), weights(m);
  for (std::size_t i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(m) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 1; j <= m; ++j) {
        const double p2 = p1;
        p1 = p0;
        const double jj = static_cast<double>(j);
        p0 = ((2.0 * jj - 1.0) * z * p1 - (jj - 1.0) * p2) / jj;
      }
      dp = static_cast<double>(m) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[i] = -z;
    nodes[m - 1 - i] = z;
    weights[i] = weights[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (m % 2 == 1) nodes[m / 2] = 0.0;
  return {nodes, weights};
}

/// Quadrature points on the decision boundary S = {eta = 1/2} within the
/// (truncated) support; weights approximate the (d-1)-dimensional surface
/// measure.
struct BoundaryMesh {
  std::size_t dimension = 0;
  std::vector<double> points;  // row-major, size() * dimension
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dimension, dimension};
  }
  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

namespace detail {

struct PanelRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline PanelRule composite_rule(double lo, double hi, std::size_t panels, std::size_t per_panel) {
  const auto [gx, gw] = gauss_legendre(per_panel);
  PanelRule r;
  const double h = (hi - lo) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = lo + h * static_cast<double>(p);
    for (std::size_t q = 0; q < per_panel; ++q) {
      r.nodes.push_back(a + 0.5 * h * (gx[q] + 1.0));
      r.weights.push_back(0.5 * h * gw[q]);
    }
  }
  return r;
}

}  // namespace detail

/// Meshes a hyperplane boundary {a.x = c} intersected with the model's
/// integration region. The coordinate with the largest |a_i| is solved for;
/// the one with the next largest is integrated over its exact feasible
/// interval; the remaining d-2 coordinates use a tensor composite
/// Gauss-Legendre rule with `resolution` panels per axis.
inline BoundaryMesh boundary_mesh(const Model& model, std::size_t resolution,
                                  std::size_t nodes_per_panel = 2) {
  if (resolution == 0) throw InputError("boundary_mesh: resolution must be positive");
  const auto plane = model.boundary_hyperplane();
  if (!plane) throw DegenerateBoundaryError("boundary_mesh: model has no hyperplane boundary");
  const std::vector<double>& a = plane->normal;
  const double c = plane->offset;
  const std::size_t d = model.dimension();
  detail::require_dimension(a.size(), d, "boundary_mesh");
  const double a_norm = detail::norm2(a);
  if (!(a_norm > 0.0)) throw DegenerateBoundaryError("boundary_mesh: boundary normal is zero");

  const IntegrationRegion region = model.integration_region();
  BoundaryMesh mesh;
  mesh.dimension = d;

  if (d == 1) {
    const double x0 = c / a[0];
    const std::vector<double> x{x0};
    if (!region.contains(x)) throw DegenerateBoundaryError("boundary_mesh: boundary outside support");
    mesh.points = x;
    mesh.weights = {1.0};
    return mesh;
  }

  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(region.lower[i]) || !std::isfinite(region.upper[i])) {
      throw InputError("boundary_mesh: integration region must be bounded");
    }
  }

  auto by_magnitude = [&](std::size_t skip) {
    std::size_t best = d;
    for (std::size_t i = 0; i < d; ++i) {
      if (i == skip) continue;
      if (best == d || std::abs(a[i]) > std::abs(a[best])) best = i;
    }
    return best;
  };
  const std::size_t solved = by_magnitude(d);
  const std::size_t inner = by_magnitude(solved);
  std::vector<std::size_t> outer;
  for (std::size_t i = 0; i < d; ++i) {
    if (i != solved && i != inner) outer.push_back(i);
  }

  std::vector<detail::PanelRule> outer_rules;
  for (std::size_t i : outer) {
    outer_rules.push_back(
        detail::composite_rule(region.lower[i], region.upper[i], resolution, nodes_per_panel));
  }
  const double surface_factor = a_norm / std::abs(a[solved]);
  const double slope = -a[inner] / a[solved];  // x_solved = base + slope * x_inner

  std::vector<std::size_t> cursor(outer.size(), 0);
  std::vector<double> x(d, 0.0);
  constexpr double tiny = 1e-300;
  while (true) {
    double outer_weight = surface_factor;
    double partial = c;
    for (std::size_t o = 0; o < outer.size(); ++o) {
      x[outer[o]] = outer_rules[o].nodes[cursor[o]];
      outer_weight *= outer_rules[o].weights[cursor[o]];
      partial -= a[outer[o]] * x[outer[o]];
    }
    const double base = partial / a[solved];

    double lo = region.lower[inner];
    double hi = region.upper[inner];
    bool empty = false;
    // coef * x_inner <= rhs
    auto restrict = [&](double coef, double rhs) {
      if (std::abs(coef) < tiny) {
        if (rhs < 0.0) empty = true;
      } else if (coef > 0.0) {
        hi = std::min(hi, rhs / coef);
      } else {
        lo = std::max(lo, rhs / coef);
      }
    };
    restrict(slope, region.upper[solved] - base);
    restrict(-slope, base - region.lower[solved]);
    for (const auto& con : region.constraints) {
      double rhs = con.bound - con.coeffs[solved] * base;
      for (std::size_t i : outer) rhs -= con.coeffs[i] * x[i];
      restrict(con.coeffs[inner] + con.coeffs[solved] * slope, rhs);
    }

    if (!empty && hi > lo) {
      const auto rule = detail::composite_rule(lo, hi, resolution, nodes_per_panel);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        x[inner] = rule.nodes[q];
        x[solved] = std::clamp(base + slope * x[inner], region.lower[solved], region.upper[solved]);
        mesh.points.insert(mesh.points.end(), x.begin(), x.end());
        mesh.weights.push_back(outer_weight * rule.weights[q]);
      }
    }

    std::size_t o = 0;
    for (; o < outer.size(); ++o) {
      if (++cursor[o] < outer_rules[o].nodes.size()) break;
      cursor[o] = 0;
    }
    if (o == outer.size()) break;
  }
  if (mesh.weights.empty()) throw DegenerateBoundaryError("boundary_mesh: boundary outside support");
  return mesh;
}

/// b(x) = (1 / (f(x) d)) * sum_j [eta'_j f'_j + eta''_jj f / 2].
inline double b_term(const Model& model, std::span<const double> x) {
  detail::require_dimension(x.size(), model.dimension(), "b_term");
  const double f = model.density(x);
  if (!(f > 0.0)) throw DomainError("b_term: density vanishes at x");
  const auto g = model.eta_grad(x);
  const auto fg = model.density_grad(x);
  const auto h = model.eta_hess(x);
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += g[j] * fg[j] + h(j, j) * f / 2.0;
  return s / (f * static_cast<double>(d));
}

/// Volume of the Euclidean unit ball, written as 2^d Gamma(3/2)^d / Gamma(1 + d/2).
inline double unit_ball_volume(std::size_t d) {
  const double dd = static_cast<double>(d);
  return std::exp(dd * std::log(2.0) + dd * std::lgamma(1.5) - std::lgamma(1.0 + dd / 2.0));
}

/// Leading-order squared radius of the k-NN ball at x:
/// (k / (n a_d f(x)))^{2/d}. The mean squared distance over the k neighbors
/// is d / (d + 2) times this value.
inline double t_kn(const Model& model, std::span<const double> x, std::size_t k, std::size_t n) {
  detail::require_dimension(x.size(), model.dimension(), "t_kn");
  if (k < 1 || k > n) throw InputError("t_kn: need 1 <= k <= n");
  const double f = model.density(x);
  if (!(f > 0.0)) throw DomainError("t_kn: density vanishes at x");
  const double d = static_cast<double>(x.size());
  return std::pow(static_cast<double>(k) / (static_cast<double>(n) * unit_ball_volume(x.size()) * f),
                  2.0 / d);
}

inline double t_max(const Model& model, const BoundaryMesh& mesh, std::size_t k, std::size_t n) {
  double t = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i) t = std::max(t, t_kn(model, mesh.point(i), k, n));
  return t;
}

/// |grad Psi(x0)| for Psi = f (1 - 2 eta); on the boundary this is 2 f |grad eta|.
inline double psi_grad_norm(const Model& model, std::span<const double> x0) {
  detail::require_dimension(x0.size(), model.dimension(), "psi_grad_norm");
  if (std::abs(model.eta(x0) - 0.5) > 1e-8) throw InputError("psi_grad_norm: point is off the boundary");
  return 2.0 * model.density(x0) * detail::norm2(model.eta_grad(x0));
}

struct TheoryReport {
  double bias = 0.0;
  double corruption = 0.0;
  double variance = 0.0;
  double total = 0.0;
  double t_max = 0.0;    // max of t_kn over the mesh
  double eps_knw = 0.0;  // max(log k / sqrt k, t + omega)
  double b1 = 0.0;       // (1/2) integral of |grad Psi| / |grad eta|^2
  std::vector<std::string> warnings;
};

namespace detail {

struct BoundaryIntegrals {
  double bias = 0.0;   // integral |Psi'| / |eta'|^2 (b t)^2
  double psi = 0.0;    // integral |Psi'|
  double b1 = 0.0;     // integral |Psi'| / |eta'|^2
  double t_max = 0.0;
};

inline BoundaryIntegrals integrate_boundary(const Model& model, const BoundaryMesh& mesh, std::size_t k,
                                            std::size_t n) {
  if (mesh.size() == 0 || mesh.dimension != model.dimension()) {
    throw DegenerateBoundaryError("theory: mesh does not match model");
  }
  if (k < 1 || k > n) throw InputError("theory: need 1 <= k <= n");
  BoundaryIntegrals out;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto x0 = mesh.point(i);
    const double w = mesh.weights[i];
    const double g2 = [&] {
      const auto g = model.eta_grad(x0);
      return dot(g, g);
    }();
    if (!(g2 > 0.0)) throw DegenerateBoundaryError("theory: eta gradient vanishes on the boundary");
    const double psi = psi_grad_norm(model, x0);
    const double t = t_kn(model, x0, k, n);
    const double bt = b_term(model, x0) * t;
    out.bias += w * psi / g2 * bt * bt;
    out.psi += w * psi;
    out.b1 += w * psi / g2;
    out.t_max = std::max(out.t_max, t);
  }
  return out;
}

inline void finish(TheoryReport& r, std::size_t k, double omega) {
  r.total = r.bias + r.corruption + r.variance;
  const double kk = static_cast<double>(k);
  r.eps_knw = std::max(std::log(kk) / std::sqrt(kk), r.t_max + omega);
}

}  // namespace detail

inline TheoryReport adversarial_theoretical_regret(const Model& model, std::size_t k, std::size_t n, double omega,
                                            const BoundaryMesh& mesh);

/// Leading terms of the perturbed regret: squared bias, corruption, variance.
/// For random noise the corruption integrand uses E(eps . eta')^2 / |eta'|^2,
/// which is omega^2 / d on the L2 sphere.
inline TheoryReport theoretical_regret(const Model& model, std::size_t k, std::size_t n,
                                       const CorruptionSpec& spec, const BoundaryMesh& mesh) {
  spec.validate();
  if (spec.mode == CorruptionMode::adversarial) {
    return adversarial_theoretical_regret(model, k, n, spec.omega, mesh);
  }
  const auto I = detail::integrate_boundary(model, mesh, k, n);
  const double omega = spec.mode == CorruptionMode::none ? 0.0 : spec.omega;
  const std::size_t d = model.dimension();
  double moment = 0.0;
  if (omega > 0.0) {
    moment = (spec.is_l2() && spec.geometry == Geometry::sphere)
                 ? omega * omega / static_cast<double>(d)
                 : omega * omega * unit_offset_coordinate_moment(d, spec.norm_p, spec.geometry);
  }
  TheoryReport r;
  r.b1 = 0.5 * I.b1;
  r.bias = 0.5 * I.bias;
  r.corruption = 0.5 * moment * I.psi;
  r.variance = r.b1 / (4.0 * static_cast<double>(k));
  r.t_max = I.t_max;
  detail::finish(r, k, omega);
  return r;
}

/// Regret under the white-box attack, with the squared-radius scale zeta
/// taken as t_kn and B1 as the variance constant.
inline TheoryReport adversarial_theoretical_regret(const Model& model, std::size_t k, std::size_t n,
                                                   double omega, const BoundaryMesh& mesh) {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw InputError("adversarial regret: omega must be >= 0");
  const auto I = detail::integrate_boundary(model, mesh, k, n);
  TheoryReport r;
  r.b1 = 0.5 * I.b1;
  r.bias = 0.5 * I.bias;
  r.corruption = omega * omega * I.psi;
  r.variance = r.b1 / (4.0 * static_cast<double>(k));
  r.t_max = I.t_max;
  if (!(omega > 1.0 / std::sqrt(static_cast<double>(k)) && omega > r.t_max)) {
    r.warnings.push_back("adversarial formula assumes 1/sqrt(k) and zeta are small against omega");
  }
  detail::finish(r, k, omega);
  return r;
}

// ---------------------------------------------------------------------------
// Rate calculators (order formulas with unit constants)

struct GeneralRateParams {
  double alpha = 2.0;  // smoothness exponent
  double beta = 1.0;   // margin exponent
  double A = 1.0;
  double B = 1.0;
};

namespace detail {
inline std::size_t round_k(double k, std::size_t n) {
  const double r = std::round(k);
  if (!(r >= 1.0)) return 1;
  if (r >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(r);
}

inline void check_rate_args(std::size_t n, std::size_t d, double omega) {
  if (n < 2) throw InputError("rate: n must be at least 2");
  if (d < 1) throw InputError("rate: d must be positive");
  if (!(omega >= 0.0)) throw InputError("rate: omega must be >= 0");
}

inline void check_params(const GeneralRateParams& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0)) throw InputError("rate: alpha and beta must be positive");
}
}  // namespace detail

/// k = n^{4/(4+d)}. For omega above n^{-4/(3(4+d))} any k with
/// 1/omega^2 <= k <= n omega^{d/2} attains the rate, and this k is inside
/// that band, so the same value is returned.
inline std::size_t optimal_k(std::size_t n, std::size_t d, double omega) {
  detail::check_rate_args(n, d, omega);
  const double dd = static_cast<double>(d);
  return detail::round_k(std::pow(static_cast<double>(n), 4.0 / (4.0 + dd)), n);
}

/// k = n^{2a/(2a+d)} min (n^{2a/d} omega^{-2ab})^{1/(2a/d + b + 1)}.
inline std::size_t general_rate_k(const GeneralRateParams& p, std::size_t n, std::size_t d, double omega) {
  detail::check_params(p);
  detail::check_rate_args(n, d, omega);
  const double dd = static_cast<double>(d);
  const double ln = std::log(static_cast<double>(n));
  double log_k = 2.0 * p.alpha / (2.0 * p.alpha + dd) * ln;
  if (omega > 0.0) {
    const double log_k2 = (2.0 * p.alpha / dd * ln - 2.0 * p.alpha * p.beta * std::log(omega)) /
                          (2.0 * p.alpha / dd + p.beta + 1.0);
    log_k = std::min(log_k, log_k2);
  }
  return detail::round_k(std::exp(log_k), n);
}

/// omega^{a(b+1)} max n^{-a(b+1)/(2a+d)}.
inline double general_rate(const GeneralRateParams& p, std::size_t n, std::size_t d, double omega) {
  detail::check_params(p);
  detail::check_rate_args(n, d, omega);
  const double e = p.alpha * (p.beta + 1.0);
  const double clean = std::pow(static_cast<double>(n), -e / (2.0 * p.alpha + static_cast<double>(d)));
  return std::max(std::pow(omega, e), clean);
}

}  // namespace knnlab
