#pragma once

// Portable pseudo-random numbers.
//
// Every random choice in the pipeline (corpus shuffles, k-means++ seeding,
// stratified splits, mini-batch order, hyperparameter draws) goes through
// SplitMix64 together with the integer/real mappings below. None of them
// touch <random> distributions, whose outputs are implementation-defined,
// so a given seed yields the same stream on every platform.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace triplex {

// SplitMix64 (Steele, Lea & Flood). A 64-bit counter passed through a fixed
// avalanche finalizer; the counter increment is the golden-ratio constant.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept { return next(); }

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    return mix(z);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform integer in [lo, hi] (inclusive).
  constexpr std::int64_t between(std::int64_t lo, std::int64_t hi) noexcept {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (one value per call; the pair's second
  // half is discarded to keep the stream position easy to reason about).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Independent child seed for a named sub-stage.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  return SplitMix64::mix(base ^ SplitMix64::mix(tag + 0x632be59bd9b4e019ULL));
}

// Fisher-Yates, walking from the back.
template <class T>
void shuffle(std::span<T> items, SplitMix64& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace triplex
