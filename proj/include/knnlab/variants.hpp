#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "knnlab/corruption.hpp"
#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"
#include "knnlab/neighbors.hpp"
#include "knnlab/rng.hpp"

namespace knnlab {

/// Training points with labels replaced by leave-self-out k-NN votes.
class RelabeledDataset {
 public:
  RelabeledDataset(Dataset base, std::vector<Label> relabels, std::size_t k_used)
      : base_(std::move(base)), relabels_(std::move(relabels)), k_used_(k_used) {
    if (relabels_.size() != base_.size()) {
      throw InputError("RelabeledDataset: relabel count must equal dataset size");
    }
    index_ = std::make_shared<const SearchIndex>(base_);
  }

  const Dataset& base() const noexcept { return base_; }
  std::span<const Label> relabels() const noexcept { return relabels_; }
  std::size_t k_used() const noexcept { return k_used_; }
  const SearchIndex& index() const noexcept { return *index_; }

 private:
  Dataset base_;
  std::vector<Label> relabels_;
  std::size_t k_used_;
  std::shared_ptr<const SearchIndex> index_;
};

/// Relabels each x_i by the strict-majority vote of its k nearest neighbors,
/// x_i itself excluded by index (duplicates of x_i stay eligible).
inline RelabeledDataset preprocess(const Dataset& data, std::size_t k, const SearchIndex& index) {
  detail::check_index_matches(index, data);
  if (k < 1 || k >= data.size()) {
    throw InputError("preprocess: k must lie in [1, n - 1]");
  }
  std::vector<Label> relabels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    relabels[i] = vote(index.positive_count(data.point(i), k, i), k);
  }
  return RelabeledDataset(data, std::move(relabels), k);
}

inline RelabeledDataset preprocess(const Dataset& data, std::size_t k) {
  if (k < 1 || k >= data.size()) throw InputError("preprocess: k must lie in [1, n - 1]");
  return preprocess(data, k, SearchIndex(data));
}

/// 1NN on the relabeled data: the relabel of the nearest training point.
inline Label pre1nn_classify(const RelabeledDataset& relabeled, std::span<const double> x) {
  return relabeled.relabels()[relabeled.index().nearest(x)];
}

/// Random split of n indices into s shards whose sizes differ by at most one.
struct Partition {
  std::size_t shards = 1;
  std::vector<std::size_t> assignment;  // dataset index -> shard id

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(shards);
    for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
    return out;
  }
};

inline Partition make_partition(std::size_t n, std::size_t shards, RngHandle& rng) {
  if (shards < 1 || shards > n) throw InputError("make_partition: need 1 <= s <= n");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Partition p{shards, std::vector<std::size_t>(n)};
  const std::size_t base = n / shards;
  const std::size_t extra = n % shards;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) p.assignment[perm[pos++]] = s;
  }
  return p;
}

/// In-process simulation of distributed NN: one sub-index per shard, each
/// contributing floor(k/s) neighbors; shard estimates are averaged.
class DistributedKnn {
 public:
  DistributedKnn(const Dataset& data, const Partition& partition) {
    if (partition.assignment.size() != data.size()) {
      throw InputError("DistributedKnn: partition does not match dataset size");
    }
    for (const auto& idx : partition.members()) {
      if (idx.empty()) throw InputError("DistributedKnn: empty shard");
      shards_.push_back(std::make_unique<Shard>(data.subset(idx)));
    }
  }

  std::size_t shard_count() const noexcept { return shards_.size(); }

  std::size_t per_shard_k(std::size_t k) const {
    const std::size_t ks = k / shards_.size();
    if (ks < 1) throw InputError("distributed NN: k must be at least the number of shards");
    for (const auto& s : shards_) {
      if (s->data.size() < ks) throw InputError("distributed NN: shard smaller than k/s");
    }
    return ks;
  }

  // s * floor(k / s)
  std::size_t effective_k(std::size_t k) const { return per_shard_k(k) * shards_.size(); }

  std::size_t positive_count(std::span<const double> x, std::size_t k) const {
    const std::size_t ks = per_shard_k(k);
    std::size_t total = 0;
    for (const auto& s : shards_) total += s->index.positive_count(x, ks);
    return total;
  }

  // Fixed shard order keeps the floating-point sum reproducible.
  double eta_hat(std::span<const double> x, std::size_t k) const {
    const std::size_t ks = per_shard_k(k);
    double sum = 0.0;
    for (const auto& s : shards_) {
      sum += static_cast<double>(s->index.positive_count(x, ks)) / static_cast<double>(ks);
    }
    return sum / static_cast<double>(shards_.size());
  }

  Label classify(std::span<const double> x, std::size_t k) const {
    return vote(positive_count(x, k), effective_k(k));
  }

 private:
  struct Shard {
    explicit Shard(Dataset d) : data(std::move(d)), index(data) {}
    Dataset data;
    SearchIndex index;
  };
  std::vector<std::unique_ptr<Shard>> shards_;
};

inline double distributed_eta_hat(const Dataset& data, const Partition& partition,
                                  std::span<const double> x, std::size_t k) {
  return DistributedKnn(data, partition).eta_hat(x, k);
}

/// k-NN trained on noise-injected training points.
struct NoiseInjectedKnn {
  Dataset data;
  SearchIndex index;

  explicit NoiseInjectedKnn(Dataset d) : data(std::move(d)), index(data) {}

  Label classify(std::span<const double> x, std::size_t k) const {
    return knnlab::classify(index, data, x, k);
  }
};

inline NoiseInjectedKnn train_noise_injected(const Dataset& data, const CorruptionSpec& spec,
                                             RngHandle& rng) {
  return NoiseInjectedKnn(inject_noise(data, spec, rng));
}

}  // namespace knnlab
