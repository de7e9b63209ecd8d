#include <gtest/gtest.h>

#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/lab/cv.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"
#include "knnlab/variants.hpp"

using namespace knnlab;
using namespace knnlab::lab;

namespace {

Dataset sample(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngHandle rng(seed, 0);
  return sample_dataset(SyntheticModel::uniform_benchmark(d), n, rng);
}

// Fold errors recomputed with brute-force neighbor search.
std::vector<std::size_t> naive_errors(const Dataset& data, std::size_t folds, const std::vector<std::size_t>& grid,
                                      RngHandle rng, bool pre1nn) {
  std::vector<std::size_t> errors(grid.size(), 0);
  for (const auto& held : lab::detail::make_folds(data.size(), folds, rng)) {
    const Dataset train = data.subset(lab::detail::complement(data.size(), held));
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const std::size_t k = grid[g];
      if (pre1nn) {
        const auto pre = preprocess(train, k);
        for (std::size_t h : held) {
          const std::size_t nn = brute_force_knn(train, data.point(h), 1).indices[0];
          if (pre.relabels()[nn] != data.label(h)) ++errors[g];
        }
      } else {
        for (std::size_t h : held) {
          std::size_t pos = 0;
          for (auto i : brute_force_knn(train, data.point(h), k).indices) pos += train.label(i);
          if (vote(pos, k) != data.label(h)) ++errors[g];
        }
      }
    }
  }
  return errors;
}

}  // namespace

TEST(CvGrid, RescaleAndLimits) {
  EXPECT_EQ(rescale_cv_k(10, 5, 5, 1000), 11u);
  EXPECT_EQ(rescale_cv_k(1, 5, 1, 1000), 1u);
  EXPECT_EQ(rescale_cv_k(500, 2, 1, 600), 599u);
  EXPECT_EQ(max_cv_k(100, 5), 80u);
  EXPECT_EQ(max_cv_k(101, 5), 80u);
}

TEST(CvGrid, DefaultGridShape) {
  for (std::size_t n : {4u, 10u, 64u, 1000u, 100000u}) {
    const auto grid = default_k_grid(n);
    ASSERT_FALSE(grid.empty());
    EXPECT_EQ(grid.front(), 1u);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_EQ(grid[i] % 2, 1u);
      EXPECT_LE(grid[i], std::max<std::size_t>(1, std::min<std::size_t>({n / 2, 301, max_cv_k(n, 5)})));
      if (i > 0) {
        EXPECT_GT(grid[i], grid[i - 1]);
      }
    }
  }
  EXPECT_EQ(default_k_grid(100000).back(), 301u);
  EXPECT_EQ(default_k_grid(64).back(), 31u);
}

TEST(CrossValidate, SingletonGridReturnsIt) {
  const auto data = sample(200, 2, 1);
  RngHandle rng(1, 4);
  const std::vector<std::size_t> grid = {3};
  const auto r = cross_validate_k(data, 5, grid, rng);
  EXPECT_EQ(r.k_tilde, 3u);
  EXPECT_EQ(r.k_hat, rescale_cv_k(3, 5, 2, 200));
}

TEST(CrossValidate, MatchesBruteForceFolds) {
  const auto data = sample(150, 3, 2);
  const std::vector<std::size_t> grid = {1, 3, 7, 15, 31};
  RngHandle rng(2, 4);
  const auto want = naive_errors(data, 5, grid, rng, false);
  const auto r = cross_validate_k(data, 5, grid, rng);
  EXPECT_EQ(r.errors, want);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (want[i] < want[best]) best = i;
  }
  EXPECT_EQ(r.k_tilde, grid[best]);
}

TEST(CrossValidate, Pre1nnMatchesBruteForceFolds) {
  const auto data = sample(120, 2, 3);
  const std::vector<std::size_t> grid = {1, 5, 9, 21};
  RngHandle rng(3, 4);
  const auto want = naive_errors(data, 4, grid, rng, true);
  EXPECT_EQ(cross_validate_k_pre1nn(data, 4, grid, rng).errors, want);
}

TEST(CrossValidate, DeterministicPerSeed) {
  const auto data = sample(300, 4, 4);
  RngHandle a(4, 4), b(4, 4);
  const auto ra = cross_validate_k(data, 5, a);
  const auto rb = cross_validate_k(data, 5, b);
  EXPECT_EQ(ra.errors, rb.errors);
  EXPECT_EQ(ra.k_hat, rb.k_hat);
  EXPECT_EQ(ra.k_grid, default_k_grid(300));
}

TEST(CrossValidate, TiesKeepSmallestK) {
  // Perfectly separated clusters: every k in the grid has zero error.
  std::vector<double> xs;
  std::vector<Label> ys;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(i * 0.001);
    ys.push_back(0);
    xs.push_back(100.0 + i * 0.001);
    ys.push_back(1);
  }
  const Dataset data(1, xs, ys);
  RngHandle rng(5, 4);
  const std::vector<std::size_t> grid = {9, 3, 5};
  const auto r = cross_validate_k(data, 5, grid, rng);
  EXPECT_EQ(r.k_grid, (std::vector<std::size_t>{3, 5, 9}));
  EXPECT_EQ(r.errors, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(r.k_tilde, 3u);
}

TEST(CrossValidate, InputErrors) {
  const auto data = sample(50, 2, 6);
  RngHandle rng(6, 4);
  const std::vector<std::size_t> empty;
  EXPECT_THROW(cross_validate_k(data, 5, empty, rng), InputError);
  const std::vector<std::size_t> too_big = {41};
  EXPECT_THROW(cross_validate_k(data, 5, too_big, rng), InputError);
  const std::vector<std::size_t> zero = {0, 1};
  EXPECT_THROW(cross_validate_k(data, 5, zero, rng), InputError);
  const std::vector<std::size_t> ok = {40};
  EXPECT_NO_THROW(cross_validate_k(data, 5, ok, rng));
  EXPECT_THROW(cross_validate_k_pre1nn(data, 5, ok, rng), InputError);
  EXPECT_THROW(cross_validate_k(data, 1, rng), InputError);
  EXPECT_THROW(cross_validate_k(data, 51, rng), InputError);
}
