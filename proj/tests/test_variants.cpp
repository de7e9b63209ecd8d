#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "knnlab/corruption.hpp"
#include "knnlab/dataspace.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"
#include "knnlab/variants.hpp"

using namespace knnlab;

namespace {

Dataset sample(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngHandle rng(seed, 0);
  return sample_dataset(SyntheticModel::uniform_benchmark(d), n, rng);
}

}  // namespace

TEST(Preprocess, HandExample) {
  const Dataset data(1, {0.0, 1.0, 2.0}, {1, 1, 0});
  const auto r = preprocess(data, 2);
  // Point 0 sees {1, 2}: eta_hat = 1/2 -> 0.
  EXPECT_EQ(r.relabels()[0], 0);
  // Point 1 sees {0, 2}: 1/2 -> 0. Point 2 sees {1, 0}: 1 -> 1.
  EXPECT_EQ(r.relabels()[1], 0);
  EXPECT_EQ(r.relabels()[2], 1);
  EXPECT_EQ(r.k_used(), 2u);
}

TEST(Preprocess, ConstantLabelsUnchanged) {
  auto data = sample(100, 3, 1);
  data = data.with_labels(std::vector<Label>(100, 1));
  const auto r = preprocess(data, 7);
  for (auto y : r.relabels()) EXPECT_EQ(y, 1);
}

TEST(Preprocess, KEqualsNMinusOneIsLeaveOneOutMajority) {
  const auto data = sample(41, 2, 2);
  std::size_t total = 0;
  for (auto y : data.labels()) total += y;
  const auto r = preprocess(data, 40);
  for (std::size_t i = 0; i < 41; ++i) {
    const std::size_t others = total - data.label(i);
    EXPECT_EQ(r.relabels()[i], 2 * others > 40 ? 1 : 0);
  }
}

TEST(Preprocess, RangeErrors) {
  const auto data = sample(10, 2, 3);
  EXPECT_THROW(preprocess(data, 10), InputError);
  EXPECT_THROW(preprocess(data, 0), InputError);
}

TEST(Preprocess, DuplicatesRemainEligible) {
  const Dataset data(1, {0.0, 0.0, 5.0}, {1, 0, 0});
  const auto r = preprocess(data, 1);
  EXPECT_EQ(r.relabels()[0], 0);  // neighbor is its duplicate, index 1
  EXPECT_EQ(r.relabels()[1], 1);
}

TEST(Preprocess, IdempotentWhenUnanimous) {
  // Two well separated clusters with pure labels.
  std::vector<double> xs;
  std::vector<Label> ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(i * 0.01);
    ys.push_back(0);
    xs.push_back(10.0 + i * 0.01);
    ys.push_back(1);
  }
  const Dataset data(1, xs, ys);
  const auto first = preprocess(data, 5);
  const auto relabeled = data.with_labels({first.relabels().begin(), first.relabels().end()});
  const auto second = preprocess(relabeled, 5);
  EXPECT_TRUE(std::equal(first.relabels().begin(), first.relabels().end(), second.relabels().begin()));
  EXPECT_TRUE(std::equal(first.relabels().begin(), first.relabels().end(), data.labels().begin()));
}

TEST(Pre1nn, TrainingPointReturnsItsRelabel) {
  const auto data = sample(200, 3, 4);
  const auto r = preprocess(data, 9);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(pre1nn_classify(r, data.point(i)), r.relabels()[i]);
  }
}

TEST(Pre1nn, EqualsLeaveSelfOutKnnAtNearestNeighbor) {
  const auto data = sample(500, 4, 5);
  const std::size_t k = 11;
  const auto r = preprocess(data, k);
  const SearchIndex index(data);
  RngHandle rng(6, 6);
  std::vector<double> q(4);
  for (int t = 0; t < 1000; ++t) {
    for (auto& v : q) v = rng.uniform();
    const std::size_t j = knn_query(index, q, 1).indices[0];
    const auto nb = knn_query(index, data.point(j), k, j);
    std::size_t pos = 0;
    for (auto i : nb.indices) pos += data.label(i);
    ASSERT_EQ(pre1nn_classify(r, q), 2 * pos > k ? 1 : 0);
  }
}

TEST(Pre1nn, AllOnesPattern) {
  const auto data = sample(50, 2, 7).with_labels(std::vector<Label>(50, 1));
  const auto r = preprocess(data, 3);
  const std::vector<double> q = {100.0, -4.0};
  EXPECT_EQ(pre1nn_classify(r, q), 1);
}

TEST(Partition, BalancedCoveringDeterministic) {
  RngHandle a(8, 1), b(8, 1), c(8, 2);
  const auto p = make_partition(103, 4, a);
  EXPECT_EQ(p.assignment, make_partition(103, 4, b).assignment);
  EXPECT_NE(p.assignment, make_partition(103, 4, c).assignment);
  const auto m = p.members();
  std::size_t lo = 1000, hi = 0, total = 0;
  std::set<std::size_t> seen;
  for (const auto& shard : m) {
    lo = std::min(lo, shard.size());
    hi = std::max(hi, shard.size());
    total += shard.size();
    seen.insert(shard.begin(), shard.end());
  }
  EXPECT_LE(hi - lo, 1u);
  EXPECT_EQ(total, 103u);
  EXPECT_EQ(seen.size(), 103u);
  RngHandle z(1, 1);
  EXPECT_THROW(make_partition(3, 4, z), InputError);
}

TEST(Distributed, SingleShardEqualsKnnBitExactly) {
  const auto data = sample(400, 3, 9);
  RngHandle rng(9, 1);
  const auto part = make_partition(400, 1, rng);
  const DistributedKnn dist(data, part);
  const SearchIndex index(data);
  std::vector<double> q(3);
  for (int t = 0; t < 500; ++t) {
    for (auto& v : q) v = rng.uniform();
    for (std::size_t k : {1u, 2u, 7u, 30u}) {
      ASSERT_EQ(dist.eta_hat(q, k), eta_hat(index, data, q, k));
      ASSERT_EQ(dist.classify(q, k), classify(index, data, q, k));
    }
  }
}

TEST(Distributed, KEqualsSUsesEachShardsNearestLabel) {
  const auto data = sample(120, 2, 10);
  RngHandle rng(10, 1);
  const auto part = make_partition(120, 6, rng);
  const DistributedKnn dist(data, part);
  const std::vector<double> q = {0.5, 0.5};
  double want = 0.0;
  for (const auto& members : part.members()) {
    const auto shard = data.subset(members);
    want += shard.label(brute_force_knn(shard, q, 1).indices[0]);
  }
  EXPECT_DOUBLE_EQ(dist.eta_hat(q, 6), want / 6.0);
  EXPECT_EQ(dist.effective_k(6), 6u);
}

TEST(Distributed, FloorRuleAndErrors) {
  const auto data = sample(40, 2, 11);
  RngHandle rng(11, 1);
  const DistributedKnn dist(data, make_partition(40, 4, rng));
  EXPECT_EQ(dist.per_shard_k(10), 2u);
  EXPECT_EQ(dist.effective_k(10), 8u);
  EXPECT_THROW(dist.per_shard_k(3), InputError);
  EXPECT_THROW(dist.per_shard_k(48), InputError);  // 12 per shard > 10 points
  const std::vector<double> q = {0.1, 0.2};
  const double e = distributed_eta_hat(data, make_partition(40, 4, rng), q, 8);
  EXPECT_GE(e, 0.0);
  EXPECT_LE(e, 1.0);
}

TEST(NoiseInjected, ZeroOmegaMatchesRawAndDeterministic) {
  const auto data = sample(300, 3, 12);
  const CorruptionSpec zero{0.0, 2.0, Geometry::sphere, CorruptionMode::random};
  RngHandle a(12, 1);
  const auto model = train_noise_injected(data, zero, a);
  const SearchIndex index(data);
  RngHandle q_rng(12, 2);
  std::vector<double> q(3);
  for (int t = 0; t < 300; ++t) {
    for (auto& v : q) v = q_rng.uniform();
    ASSERT_EQ(model.classify(q, 9), classify(index, data, q, 9));
  }
  const CorruptionSpec spec{0.1, 2.0, Geometry::sphere, CorruptionMode::random};
  RngHandle b(12, 3), c(12, 3);
  const auto m1 = train_noise_injected(data, spec, b);
  const auto m2 = train_noise_injected(data, spec, c);
  EXPECT_EQ(m1.data, m2.data);
  RngHandle d(12, 4);
  EXPECT_THROW(train_noise_injected(data, {0.1, 2.0, Geometry::sphere, CorruptionMode::adversarial}, d),
               MisuseError);
}
