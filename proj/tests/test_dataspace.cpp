#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/rng.hpp"

using namespace knnlab;

namespace {

std::vector<double> random_point(RngHandle& rng, std::size_t d, double lo, double hi) {
  std::vector<double> x(d);
  for (auto& v : x) v = lo + (hi - lo) * rng.uniform();
  return x;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Point, RejectsNonFiniteAndEmpty) {
  EXPECT_THROW(Point({1.0, NAN}), InputError);
  EXPECT_THROW(Point({INFINITY}), InputError);
  EXPECT_THROW(Point(std::vector<double>{}), InputError);
  EXPECT_EQ(Point({1.0, 2.0}).dimension(), 2u);
}

TEST(Dataset, ValidatesShapeAndLabels) {
  EXPECT_THROW(Dataset(2, {1.0, 2.0, 3.0}, {0, 1}), InputError);
  EXPECT_THROW(Dataset(1, {1.0}, {2}), InputError);
  EXPECT_THROW(Dataset(1, {}, {}), InputError);
  std::vector<LabeledSample> s = {{Point({0.0, 1.0}), 1}, {Point({2.0, 3.0}), 0}};
  const auto data = Dataset::from_samples(s);
  EXPECT_EQ(data.size(), 2u);
  EXPECT_EQ(data.point(1)[0], 2.0);
  EXPECT_EQ(data.label(0), 1);
  std::vector<LabeledSample> bad = {{Point({0.0}), 1}, {Point({2.0, 3.0}), 0}};
  EXPECT_THROW(Dataset::from_samples(bad), InputError);
}

TEST(Eta, ZeroMarginIsHalf) {
  const auto m = SyntheticModel::exponential_benchmark(5);
  EXPECT_EQ(eta(m, std::vector<double>(5, 0.0)), 0.5);
  const std::vector<double> x = {0.0, 3.0, 0.0, 1.0, 0.0};  // -1.5 + 1.5
  EXPECT_EQ(eta(m, x), 0.5);
}

TEST(Eta, BenchmarkWeightsAndValue) {
  const auto m = SyntheticModel::exponential_benchmark(5);
  const std::vector<double> w = {-1.5, -0.5, 0.5, 1.5, 2.5};
  EXPECT_EQ(m.weights(), w);
  const std::vector<double> ones(5, 1.0);
  const double expected = std::exp(2.5) / (std::exp(2.5) + std::exp(-2.5));
  EXPECT_NEAR(eta(m, ones), expected, 1e-15);
  EXPECT_NEAR(eta(m, ones), 0.993307, 1e-6);

  const auto u = SyntheticModel::uniform_benchmark(5);
  const std::vector<double> wu = {-2.0, -1.0, 0.0, 1.0, 2.0};
  EXPECT_EQ(u.weights(), wu);
}

TEST(Eta, StableAtExtremeMargins) {
  SyntheticModel m({1.0}, IidUniform{});
  const std::vector<double> big = {350.0}, small = {-350.0};  // x.w = +-700 after doubling
  EXPECT_EQ(eta(m, big), 1.0);
  EXPECT_GE(eta(m, small), 0.0);
  EXPECT_TRUE(std::isfinite(eta(m, small)));
  double prev = 0.0;
  for (double t = -20.0; t <= 20.0; t += 0.5) {
    const std::vector<double> x = {t};
    const double e = eta(m, x);
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(Eta, DimensionMismatchThrows) {
  const auto m = SyntheticModel::exponential_benchmark(3);
  const std::vector<double> x(2, 0.0);
  EXPECT_THROW(eta(m, x), InputError);
  EXPECT_THROW(eta_grad(m, x), InputError);
  EXPECT_THROW(eta_hess(m, x), InputError);
  EXPECT_THROW(density(m, x), InputError);
}

TEST(EtaGrad, OnBoundaryIsHalfW) {
  const auto m = SyntheticModel::exponential_benchmark(5);
  const std::vector<double> x = {1.0, 0.0, 3.0, 0.0, 0.0};  // -1.5 + 1.5 = 0
  ASSERT_DOUBLE_EQ(eta(m, x), 0.5);
  const auto g = eta_grad(m, x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g[i], m.weights()[i] / 2.0, 1e-15);
  const auto h = eta_hess(m, x);
  for (double v : h.data) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(EtaGrad, ZeroWeightsGiveZeroGradient) {
  SyntheticModel m({0.0, 0.0}, IidUniform{});
  const std::vector<double> x = {0.3, 0.7};
  for (double v : eta_grad(m, x)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(eta(m, x), 0.5);
}

TEST(EtaGrad, MatchesCentralDifferences) {
  RngHandle rng(11, 0);
  const double h = 1e-5;
  for (const auto& m : {SyntheticModel::exponential_benchmark(5), SyntheticModel::uniform_benchmark(3)}) {
    const std::size_t d = m.dimension();
    for (int trial = 0; trial < 100; ++trial) {
      auto x = random_point(rng, d, 0.0, 1.0);
      const auto g = eta_grad(m, x);
      const auto H = eta_hess(m, x);
      for (std::size_t i = 0; i < d; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (eta(m, xp) - eta(m, xm)) / (2 * h);
        EXPECT_LT(rel_err(g[i], fd), 1e-5);
        const auto gp = eta_grad(m, xp), gm = eta_grad(m, xm);
        for (std::size_t j = 0; j < d; ++j) {
          EXPECT_LT(rel_err(H(j, i), (gp[j] - gm[j]) / (2 * h)), 1e-5);
        }
      }
    }
  }
}

TEST(Density, UniformAndExponentialValues) {
  const auto u = SyntheticModel::uniform_benchmark(2);
  const std::vector<double> in = {0.3, 0.9}, out = {0.3, 1.2};
  EXPECT_EQ(density(u, in), 1.0);
  EXPECT_EQ(density(u, out), 0.0);
  for (double g : density_grad(u, in)) EXPECT_EQ(g, 0.0);

  SyntheticModel e({1.0}, IidExponential{0.5});
  const std::vector<double> x = {0.5};
  EXPECT_NEAR(density(e, x), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(density(e, x), 0.73576, 1e-5);
  EXPECT_NEAR(density_grad(e, x)[0], -4.0 * std::exp(-1.0), 1e-15);
  const std::vector<double> neg = {-0.1};
  EXPECT_EQ(density(e, neg), 0.0);
}

TEST(Density, GradientMatchesFiniteDifferences) {
  const auto m = SyntheticModel::exponential_benchmark(3);
  RngHandle rng(5, 0);
  for (int t = 0; t < 50; ++t) {
    auto x = random_point(rng, 3, 0.1, 2.0);
    const auto g = density_grad(m, x);
    for (std::size_t i = 0; i < 3; ++i) {
      auto xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      EXPECT_NEAR(g[i], (density(m, xp) - density(m, xm)) / 2e-6, 1e-6 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST(Density, IntegratesToOne) {
  // d = 2 exponential by midpoint rule on [0, 12]^2, and uniform trivially.
  const auto m = SyntheticModel::exponential_benchmark(2);
  const int cells = 1200;
  const double h = 12.0 / cells;
  double total = 0.0;
  std::vector<double> x(2);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      x = {(i + 0.5) * h, (j + 0.5) * h};
      total += density(m, x) * h * h;
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-3);

  // d = 3 by Monte Carlo importance sampling from the uniform cube [0, 8]^3.
  const auto m3 = SyntheticModel::exponential_benchmark(3);
  RngHandle rng(3, 1);
  double s = 0.0;
  const int draws = 2000000;
  for (int i = 0; i < draws; ++i) {
    auto y = random_point(rng, 3, 0.0, 8.0);
    s += density(m3, y) * 512.0;
  }
  EXPECT_NEAR(s / draws, 1.0, 5e-3);
}

TEST(SampleDataset, DeterministicAndInSupport) {
  const auto u = SyntheticModel::uniform_benchmark(4);
  RngHandle a(42, 7), b(42, 7);
  const auto d1 = sample_dataset(u, 500, a);
  const auto d2 = sample_dataset(u, 500, b);
  EXPECT_EQ(d1, d2);
  for (double v : d1.coords()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  RngHandle c(42, 8);
  EXPECT_FALSE(sample_dataset(u, 500, c) == d1);
  RngHandle z(1, 1);
  EXPECT_THROW(sample_dataset(u, 0, z), InputError);
}

TEST(SampleDataset, LabelMeanMatchesIntegratedEta) {
  // d = 1 exponential(mean 0.5), w = 1: E[eta] = int 2e^{-2x} / (1 + e^{-2x}) dx.
  SyntheticModel m({1.0}, IidExponential{0.5});
  double integral = 0.0;
  const int steps = 200000;
  const double h = 20.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const double x = (i + 0.5) * h;
    integral += 2.0 * std::exp(-2.0 * x) * SyntheticModel::logistic(2.0 * x) * h;
  }
  RngHandle rng(9, 9);
  const auto data = sample_dataset(m, 1000, rng);
  double mean = 0.0;
  for (auto y : data.labels()) mean += y;
  mean /= 1000.0;
  const double se = std::sqrt(integral * (1.0 - integral) / 1000.0);
  EXPECT_NEAR(mean, integral, 3.0 * se);
}

TEST(Bayes, LabelsAndRisk) {
  const auto id = make_identity_unit_model();
  const std::vector<double> x7 = {0.7}, x5 = {0.5};
  EXPECT_EQ(bayes_label(*id, x7), 1);
  EXPECT_EQ(bayes_label(*id, x5), 0);

  RngHandle rng(1, 2);
  const auto r = bayes_risk(*id, 200000, rng);
  EXPECT_NEAR(r.value, 0.25, 3.0 * r.std_error);
  EXPECT_GT(r.std_error, 0.0);

  SyntheticModel flat({0.0, 0.0}, IidUniform{});
  const auto half = bayes_risk(flat, 100, rng);
  EXPECT_EQ(half.value, 0.5);
  EXPECT_EQ(half.std_error, 0.0);
}

TEST(Bayes, LabelDependsOnlyOnSignOfMargin) {
  const auto m = SyntheticModel::uniform_benchmark(3);
  RngHandle rng(4, 4);
  for (int t = 0; t < 200; ++t) {
    auto x = random_point(rng, 3, 0.0, 1.0);
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += x[i] * m.weights()[i];
    EXPECT_EQ(bayes_label(m, x), s > 0.0 ? 1 : 0);
  }
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  RngHandle a(123, 5), b(123, 5), c(123, 6), e(124, 5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  RngHandle a2(123, 5);
  EXPECT_NE(a2.uniform(), c.uniform());
  RngHandle a3(123, 5);
  EXPECT_NE(a3.uniform(), e.uniform());
  EXPECT_EQ(a.substream(3).stream_id(), b.substream(3).stream_id());
  EXPECT_NE(a.substream(3).stream_id(), a.substream(4).stream_id());
}

TEST(Rng, DistinctStreamsLookIndependent) {
  RngHandle a(1, 100), b(1, 101);
  const int n = 100000;
  double sab = 0.0, sa = 0.0, sb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sab += x * y;
    sa += x;
    sb += y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  EXPECT_LT(std::abs(cov / (1.0 / 12.0)), 4.0 / std::sqrt(n));
}
