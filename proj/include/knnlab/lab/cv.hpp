#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"

namespace knnlab::lab {

struct CvResult {
  std::size_t k_tilde = 1;  // CV minimizer on (folds-1)/folds of the data
  std::size_t k_hat = 1;    // rescaled to the full sample size
  std::vector<std::size_t> k_grid;
  std::vector<std::size_t> errors;  // misclassifications per grid entry
};

// Largest k usable on every training fold.
inline std::size_t max_cv_k(std::size_t n, std::size_t folds) {
  return n - (n + folds - 1) / folds;
}

/// Odd k from 1 up to min(n/2, 301), spaced roughly 1.3x apart and ending at
/// the cap, restricted to k usable on every CV training fold.
inline std::vector<std::size_t> default_k_grid(std::size_t n, std::size_t folds = 5) {
  const std::size_t cap = std::min<std::size_t>({n / 2, 301, max_cv_k(n, folds)});
  std::vector<std::size_t> grid;
  double k = 1.0;
  while (true) {
    auto kk = static_cast<std::size_t>(std::lround(k));
    if (kk % 2 == 0) ++kk;
    if (kk > cap) break;
    if (grid.empty() || kk > grid.back()) grid.push_back(kk);
    k *= 1.3;
  }
  if (grid.empty()) grid.push_back(1);
  const std::size_t top = cap % 2 == 1 ? cap : cap - 1;
  if (cap >= 1 && top > grid.back()) grid.push_back(top);
  return grid;
}

/// k_hat = round(k_tilde * (folds / (folds - 1))^{4/(4+d)}), clamped to [1, n-1].
inline std::size_t rescale_cv_k(std::size_t k_tilde, std::size_t folds, std::size_t d, std::size_t n) {
  const double f = static_cast<double>(folds);
  const double scaled = static_cast<double>(k_tilde) *
                        std::pow(f / (f - 1.0), 4.0 / (4.0 + static_cast<double>(d)));
  const double hi = n > 1 ? static_cast<double>(n - 1) : 1.0;
  return static_cast<std::size_t>(std::clamp(std::round(scaled), 1.0, hi));
}

namespace detail {

inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds, RngHandle& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::vector<std::size_t>> out(folds);
  const std::size_t base = n / folds, extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                  perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(out[f].begin(), out[f].end());
    pos += len;
  }
  return out;
}

inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& sorted_subset) {
  std::vector<std::size_t> out;
  out.reserve(n - sorted_subset.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (j < sorted_subset.size() && sorted_subset[j] == i) {
      ++j;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

inline std::vector<std::size_t> checked_grid(std::span<const std::size_t> k_grid, std::size_t folds,
                                             std::size_t limit) {
  if (folds < 2) throw InputError("cross_validate_k: folds must be at least 2");
  if (k_grid.empty()) throw InputError("cross_validate_k: k grid is empty");
  std::vector<std::size_t> grid(k_grid.begin(), k_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1 || grid.back() > limit) {
    throw InputError("cross_validate_k: k grid must lie in [1, " + std::to_string(limit) + "]");
  }
  return grid;
}

inline CvResult finish_cv(std::vector<std::size_t> grid, std::vector<std::size_t> errors, std::size_t folds,
                          std::size_t d, std::size_t n) {
  CvResult r;
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (errors[i] < errors[best]) best = i;  // ties keep the smaller k
  }
  r.k_tilde = grid[best];
  r.k_hat = rescale_cv_k(r.k_tilde, folds, d, n);
  r.k_grid = std::move(grid);
  r.errors = std::move(errors);
  return r;
}

}  // namespace detail

/// Fold-wise k-NN validation error for every k in the grid; one neighbor
/// query per held-out point at the largest k.
inline CvResult cross_validate_k(const Dataset& data, std::size_t folds, std::span<const std::size_t> k_grid,
                                 RngHandle& rng) {
  const std::size_t n = data.size();
  if (folds < 2 || folds > n) throw InputError("cross_validate_k: need 2 <= folds <= n");
  auto grid = detail::checked_grid(k_grid, folds, max_cv_k(n, folds));
  const std::size_t k_max = grid.back();
  std::vector<std::size_t> errors(grid.size(), 0);
  for (const auto& held : detail::make_folds(n, folds, rng)) {
    const auto train_idx = detail::complement(n, held);
    const Dataset train = data.subset(train_idx);
    const SearchIndex index(train);
    std::vector<std::size_t> prefix(k_max + 1);
    for (std::size_t h : held) {
      const auto nb = index.query(data.point(h), k_max);
      for (std::size_t j = 0; j < k_max; ++j) prefix[j + 1] = prefix[j] + train.label(nb.indices[j]);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        if (vote(prefix[grid[g]], grid[g]) != data.label(h)) ++errors[g];
      }
    }
  }
  return detail::finish_cv(std::move(grid), std::move(errors), folds, data.dimension(), n);
}

inline CvResult cross_validate_k(const Dataset& data, std::size_t folds, RngHandle& rng) {
  const auto grid = default_k_grid(data.size(), folds);
  return cross_validate_k(data, folds, grid, rng);
}

/// Same protocol for the pre-processed 1NN classifier: each training fold is
/// relabeled by leave-self-out k-NN for every k, then held-out points take
/// the relabel of their nearest training point.
inline CvResult cross_validate_k_pre1nn(const Dataset& data, std::size_t folds,
                                        std::span<const std::size_t> k_grid, RngHandle& rng) {
  const std::size_t n = data.size();
  if (folds < 2 || folds > n) throw InputError("cross_validate_k: need 2 <= folds <= n");
  const std::size_t limit = max_cv_k(n, folds);
  auto grid = detail::checked_grid(k_grid, folds, limit > 0 ? limit - 1 : 0);
  const std::size_t k_max = grid.back();
  std::vector<std::size_t> errors(grid.size(), 0);
  for (const auto& held : detail::make_folds(n, folds, rng)) {
    const auto train_idx = detail::complement(n, held);
    const Dataset train = data.subset(train_idx);
    const SearchIndex index(train);
    // relabels[i * G + g]
    std::vector<Label> relabels(train.size() * grid.size());
    std::vector<std::size_t> prefix(k_max + 1);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto nb = index.query(train.point(i), k_max, i);
      for (std::size_t j = 0; j < k_max; ++j) prefix[j + 1] = prefix[j] + train.label(nb.indices[j]);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        relabels[i * grid.size() + g] = vote(prefix[grid[g]], grid[g]);
      }
    }
    for (std::size_t h : held) {
      const std::size_t nn = index.nearest(data.point(h));
      for (std::size_t g = 0; g < grid.size(); ++g) {
        if (relabels[nn * grid.size() + g] != data.label(h)) ++errors[g];
      }
    }
  }
  return detail::finish_cv(std::move(grid), std::move(errors), folds, data.dimension(), n);
}

inline CvResult cross_validate_k_pre1nn(const Dataset& data, std::size_t folds, RngHandle& rng) {
  auto grid = default_k_grid(data.size(), folds);
  const std::size_t limit = max_cv_k(data.size(), folds);
  std::erase_if(grid, [&](std::size_t k) { return k + 1 > limit; });
  if (grid.empty()) throw InputError("cross_validate_k_pre1nn: dataset too small");
  return cross_validate_k_pre1nn(data, folds, grid, rng);
}

}  // namespace knnlab::lab
