#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "knnlab/dataspace.hpp"
#include "knnlab/errors.hpp"

namespace knnlab {

/// The k nearest dataset points of a query, ascending by Euclidean distance.
/// Exact ties are ordered by smaller dataset index.
struct NeighborSet {
  std::vector<std::size_t> indices;
  std::vector<double> distances;

  std::size_t size() const noexcept { return indices.size(); }
};

namespace detail {

// Squared distance with the data point as first argument. Every search path
// uses this exact expression so that ties compare bit-for-bit.
inline double squared_distance(const double* point, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double diff = point[i] - q[i];
    s += diff * diff;
  }
  return s;
}

struct Candidate {
  double key;
  std::uint32_t index;

  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.key < b.key || (a.key == b.key && a.index < b.index);
  }
};

inline void check_k(std::size_t k, std::size_t n, bool excluding) {
  const std::size_t available = excluding ? n - 1 : n;
  if (k < 1 || k > available) {
    throw InputError("knn: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(available) + "]");
  }
}

inline NeighborSet to_neighbor_set(std::vector<Candidate>& cands, std::size_t k) {
  NeighborSet out;
  out.indices.reserve(k);
  out.distances.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.indices.push_back(cands[i].index);
    out.distances.push_back(std::sqrt(cands[i].key));
  }
  return out;
}

// Points on a line sorted by (coordinate, index), with label prefix counts.
class LineIndex {
 public:
  explicit LineIndex(const Dataset& data) {
    const std::size_t n = data.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    auto c = data.coords();
    std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
      return c[a] < c[b] || (c[a] == c[b] && a < b);
    });
    values_.resize(n);
    prefix_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      values_[i] = c[order_[i]];
      prefix_[i + 1] = prefix_[i] + data.label(order_[i]);
    }
  }

  std::size_t size() const noexcept { return values_.size(); }

  std::vector<Candidate> gather(double q, std::size_t k, std::optional<std::size_t> exclude) const {
    const auto n = static_cast<std::ptrdiff_t>(values_.size());
    std::ptrdiff_t right = std::lower_bound(values_.begin(), values_.end(), q) - values_.begin();
    std::ptrdiff_t left = right - 1;
    std::vector<Candidate> out;
    out.reserve(k + 4);
    constexpr double inf = std::numeric_limits<double>::infinity();
    while (left >= 0 || right < n) {
      const double kl = left >= 0 ? key(left, q) : inf;
      const double kr = right < n ? key(right, q) : inf;
      if (out.size() >= k && std::min(kl, kr) > out.back().key) break;
      const bool take_left = kl <= kr;
      const std::ptrdiff_t pos = take_left ? left : right;
      if (!exclude || order_[pos] != *exclude) out.push_back({take_left ? kl : kr, order_[pos]});
      if (take_left) {
        --left;
      } else {
        ++right;
      }
    }
    if (!std::is_sorted(out.begin(), out.end())) std::sort(out.begin(), out.end());
    out.resize(k);
    return out;
  }

  // Number of label-1 points among the k nearest, or nullopt when a distance
  // tie straddles the window edge and the contiguous-window shortcut is unsafe.
  std::optional<std::size_t> fast_positive_count(double q, std::size_t k) const {
    const std::size_t n = values_.size();
    if (k == n) return prefix_[n];
    const std::size_t pos = std::lower_bound(values_.begin(), values_.end(), q) - values_.begin();
    std::size_t lo = pos >= k ? pos - k : 0;
    std::size_t hi = std::min(pos, n - k);
    // first window start l in [lo, hi] for which shifting right does not help
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (key(mid + k, q) < key(mid, q)) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    const std::size_t l = lo;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double max_in = std::max(key(l, q), key(l + k - 1, q));
    const double min_out = std::min(l > 0 ? key(l - 1, q) : inf, l + k < n ? key(l + k, q) : inf);
    if (!(max_in < min_out)) return std::nullopt;
    return prefix_[l + k] - prefix_[l];
  }

 private:
  double key(std::ptrdiff_t pos, double q) const {
    const double diff = values_[pos] - q;
    return diff * diff;
  }

  std::vector<std::uint32_t> order_;
  std::vector<double> values_;
  std::vector<std::size_t> prefix_;
};

// k-d tree with tight per-node bounding boxes; median split on the widest axis.
class KdTree {
 public:
  KdTree(const Dataset& data, std::size_t leaf_size) : dim_(data.dimension()), leaf_size_(leaf_size) {
    const std::size_t n = data.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    source_ = data.coords();
    build(0, n);
    points_.resize(n * dim_);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = data.point(order_[i]);
      std::copy(p.begin(), p.end(), points_.begin() + i * dim_);
    }
    source_ = {};
  }

  std::size_t size() const noexcept { return order_.size(); }

  std::vector<Candidate> gather(std::span<const double> q, std::size_t k,
                                std::optional<std::size_t> exclude) const {
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    const std::uint32_t skip =
        exclude ? static_cast<std::uint32_t>(*exclude) : std::numeric_limits<std::uint32_t>::max();
    search(0, q, k, skip, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::uint32_t begin;
    std::uint32_t end;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
    boxes_.resize(boxes_.size() + 2 * dim_);
    double* lo = &boxes_[id * 2 * dim_];
    double* hi = lo + dim_;
    std::fill(lo, hi, std::numeric_limits<double>::infinity());
    std::fill(hi, hi + dim_, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      const double* p = &source_[order_[i] * dim_];
      for (std::size_t j = 0; j < dim_; ++j) {
        lo[j] = std::min(lo[j], p[j]);
        hi[j] = std::max(hi[j], p[j]);
      }
    }
    if (end - begin <= leaf_size_) return id;

    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      if (hi[j] - lo[j] > widest) {
        widest = hi[j] - lo[j];
        axis = j;
      }
    }
    if (widest <= 0.0) return id;  // all points identical

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = source_[a * dim_ + axis];
                       const double cb = source_[b * dim_ + axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].left = static_cast<std::int32_t>(left);
    nodes_[id].right = static_cast<std::int32_t>(right);
    return id;
  }

  double box_lower_bound(std::size_t node, std::span<const double> q) const {
    const double* lo = &boxes_[node * 2 * dim_];
    const double* hi = lo + dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      if (q[j] < lo[j]) {
        const double diff = lo[j] - q[j];
        s += diff * diff;
      } else if (q[j] > hi[j]) {
        const double diff = q[j] - hi[j];
        s += diff * diff;
      }
    }
    return s;
  }

  void search(std::size_t node_id, std::span<const double> q, std::size_t k, std::uint32_t skip,
              std::vector<Candidate>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        if (idx == skip) continue;
        const Candidate c{squared_distance(&points_[i * dim_], q), idx};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const auto l = static_cast<std::size_t>(node.left);
    const auto r = static_cast<std::size_t>(node.right);
    const double lb_l = box_lower_bound(l, q);
    const double lb_r = box_lower_bound(r, q);
    const bool left_first = lb_l <= lb_r;
    const std::size_t first = left_first ? l : r;
    const std::size_t second = left_first ? r : l;
    const double lb_first = left_first ? lb_l : lb_r;
    const double lb_second = left_first ? lb_r : lb_l;
    // Equal bounds may still hide an equal-distance point with a smaller index.
    if (heap.size() < k || !(lb_first > heap.front().key)) search(first, q, k, skip, heap);
    if (heap.size() < k || !(lb_second > heap.front().key)) search(second, q, k, skip, heap);
  }

  std::size_t dim_;
  std::size_t leaf_size_;
  std::vector<std::uint32_t> order_;
  std::vector<double> points_;
  std::vector<Node> nodes_;
  std::vector<double> boxes_;
  std::span<const double> source_;
};

}  // namespace detail

/// Exact k-NN by a full O(n d) scan.
inline NeighborSet brute_force_knn(const Dataset& data, std::span<const double> x, std::size_t k,
                                   std::optional<std::size_t> exclude = std::nullopt) {
  detail::require_dimension(x.size(), data.dimension(), "brute_force_knn");
  detail::check_k(k, data.size(), exclude.has_value() && *exclude < data.size());
  std::vector<detail::Candidate> all;
  all.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({detail::squared_distance(data.point(i).data(), x), static_cast<std::uint32_t>(i)});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  return detail::to_neighbor_set(all, k);
}

/// Exact nearest-neighbor index over an immutable Dataset. Uses a sorted line
/// for d = 1 and a k-d tree otherwise; results equal brute_force_knn exactly.
/// Safe for concurrent queries.
class SearchIndex {
 public:
  explicit SearchIndex(const Dataset& data, std::size_t leaf_size = 12)
      : dimension_(data.dimension()), labels_(data.labels().begin(), data.labels().end()) {
    if (data.size() > std::numeric_limits<std::uint32_t>::max() - 1) {
      throw InputError("SearchIndex: dataset too large");
    }
    if (dimension_ == 1) {
      impl_.emplace<detail::LineIndex>(data);
    } else {
      impl_.emplace<detail::KdTree>(data, std::max<std::size_t>(leaf_size, 1));
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const Label> labels() const noexcept { return labels_; }

  NeighborSet query(std::span<const double> x, std::size_t k,
                    std::optional<std::size_t> exclude = std::nullopt) const {
    auto cands = gather(x, k, exclude);
    return detail::to_neighbor_set(cands, k);
  }

  // Count of label-1 points among the k nearest neighbors of x.
  std::size_t positive_count(std::span<const double> x, std::size_t k,
                             std::optional<std::size_t> exclude = std::nullopt) const {
    if (const auto* line = std::get_if<detail::LineIndex>(&impl_); line && !exclude) {
      detail::require_dimension(x.size(), dimension_, "knn_query");
      detail::check_k(k, size(), false);
      if (auto c = line->fast_positive_count(x[0], k)) return *c;
    }
    auto cands = gather(x, k, exclude);
    std::size_t count = 0;
    for (std::size_t i = 0; i < k; ++i) count += labels_[cands[i].index];
    return count;
  }

  std::size_t nearest(std::span<const double> x) const { return gather(x, 1, std::nullopt)[0].index; }

 private:
  std::vector<detail::Candidate> gather(std::span<const double> x, std::size_t k,
                                        std::optional<std::size_t> exclude) const {
    detail::require_dimension(x.size(), dimension_, "knn_query");
    if (exclude && *exclude >= size()) exclude.reset();
    detail::check_k(k, size(), exclude.has_value());
    if (const auto* line = std::get_if<detail::LineIndex>(&impl_)) return line->gather(x[0], k, exclude);
    return std::get<detail::KdTree>(impl_).gather(x, k, exclude);
  }

  std::size_t dimension_;
  std::vector<Label> labels_;
  std::variant<std::monostate, detail::LineIndex, detail::KdTree> impl_;
};

inline NeighborSet knn_query(const SearchIndex& index, std::span<const double> x, std::size_t k,
                             std::optional<std::size_t> exclude = std::nullopt) {
  return index.query(x, k, exclude);
}

namespace detail {
inline void check_index_matches(const SearchIndex& index, const Dataset& data) {
  if (index.size() != data.size() || index.dimension() != data.dimension()) {
    throw InputError("SearchIndex was not built from this dataset");
  }
}
}  // namespace detail

/// Mean label of the k nearest neighbors.
inline double eta_hat(const SearchIndex& index, const Dataset& data, std::span<const double> x,
                      std::size_t k) {
  detail::check_index_matches(index, data);
  return static_cast<double>(index.positive_count(x, k)) / static_cast<double>(k);
}

// 1 iff strictly more than half of the k neighbors carry label 1.
inline Label vote(std::size_t positives, std::size_t k) { return 2 * positives > k ? 1 : 0; }

/// Plug-in k-NN classifier; eta_hat exactly 1/2 maps to 0.
inline Label classify(const SearchIndex& index, const Dataset& data, std::span<const double> x,
                      std::size_t k) {
  detail::check_index_matches(index, data);
  return vote(index.positive_count(x, k), k);
}

}  // namespace knnlab
