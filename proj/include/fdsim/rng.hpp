// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fdsim {

// SplitMix64 stream, the synchronization primitive of the whole system:
// every device seeds an identical stream from one pre-shared key and can
// therefore reproduce the same "random" choices with zero messages.
// Only unsigned 64-bit wrapping arithmetic and shifts are used, so the
// sequence is identical on every platform and language.
class SplitMix64 {
 public:
  SplitMix64() = default;
  constexpr explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution; exactly representable.
  constexpr double next_f64() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (cosine branch). Consumes exactly two
  // u64 draws per call, which keeps draw accounting trivial.
  double next_gaussian() {
    const double u1 = 1.0 - next_f64();  // (0, 1], keeps the log finite
    const double u2 = next_f64();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  constexpr std::uint64_t state() const { return state_; }

  bool operator==(const SplitMix64&) const = default;

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::uint64_t state_ = 0;
};

// Seed of round t, derived locally on every device from the single
// pre-shared key. Decorrelates rounds without any per-round coordination.
constexpr std::uint64_t round_seed(std::uint64_t global_seed, std::uint64_t t) {
  return SplitMix64(global_seed ^ (t * 0x9E3779B97F4A7C15ULL)).next_u64();
}

// `count` distinct indices from [0, pool_size), ascending, via partial
// Fisher-Yates. The modulo draw is biased by at most pool_size / 2^64;
// what matters here is that all devices compute the identical subset,
// not statistical perfection.
inline std::vector<std::size_t> select_subset(std::uint64_t seed, std::size_t pool_size,
                                              std::size_t count) {
  if (count > pool_size) throw std::invalid_argument("select_subset: count exceeds pool size");
  SplitMix64 gen(seed);
  std::vector<std::size_t> pool(pool_size);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(gen.next_u64() % (pool_size - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// In-place Fisher-Yates permutation, used for minibatch ordering.
inline void shuffle(SplitMix64& gen, std::vector<std::size_t>& items) {
  if (items.size() < 2) return;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(gen.next_u64() % (items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace fdsim
