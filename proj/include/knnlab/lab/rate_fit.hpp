#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knnlab/errors.hpp"

namespace knnlab::lab {

struct RatePoint {
  double scale = 0.0;   // n or omega
  double regret = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log2 scale, log2 regret)
  std::vector<std::string> warnings;
};

/// Ordinary least squares of log2 regret on log2 scale. Points with a
/// non-positive scale or regret are dropped with a warning.
inline RateFit rate_fit(std::span<const RatePoint> input) {
  RateFit fit;
  for (const auto& p : input) {
    if (!(p.scale > 0.0) || !(p.regret > 0.0) || !std::isfinite(p.scale) || !std::isfinite(p.regret)) {
      fit.warnings.push_back("rate_fit: dropped point (scale " + std::to_string(p.scale) + ", regret " +
                             std::to_string(p.regret) + ")");
      continue;
    }
    fit.points.emplace_back(std::log2(p.scale), std::log2(p.regret));
  }
  const std::size_t m = fit.points.size();
  if (m < 3) throw InputError("rate_fit: fewer than 3 usable points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) throw InputError("rate_fit: all points share one scale");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (const auto& [x, y] : fit.points) {
    const double r = y - (fit.intercept + fit.slope * x);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  return fit;
}

inline RateFit rate_fit(std::span<const double> scales, std::span<const double> regrets) {
  if (scales.size() != regrets.size()) throw InputError("rate_fit: length mismatch");
  std::vector<RatePoint> pts;
  for (std::size_t i = 0; i < scales.size(); ++i) pts.push_back({scales[i], regrets[i]});
  return rate_fit(pts);
}

}  // namespace knnlab::lab
