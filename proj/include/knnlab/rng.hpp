#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace knnlab {

// SplitMix64 finalizer; used to decorrelate seeds and derive stream ids.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stable mixing of an ordered key tuple into a single stream id.
constexpr std::uint64_t mix_stream(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t k : keys) {
    h = splitmix64(h ^ splitmix64(k));
  }
  return h;
}

/// A seeded random stream identified by (master_seed, stream_id).
///
/// Two handles with equal identifiers produce identical draws. Concurrent
/// tasks must each own a handle with a distinct stream id; the handle itself
/// is not thread-safe.
class RngHandle {
 public:
  using engine_type = std::mt19937_64;

  RngHandle(std::uint64_t master_seed, std::uint64_t stream_id)
      : master_seed_(master_seed),
        stream_id_(stream_id),
        engine_(splitmix64(master_seed ^ splitmix64(stream_id + 0xA5A5A5A5ULL))) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Fresh handle on a child stream; does not consume draws from this one.
  RngHandle substream(std::uint64_t key) const {
    return RngHandle(master_seed_, mix_stream({stream_id_, key}));
  }

  engine_type& engine() noexcept { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
};

}  // namespace knnlab
