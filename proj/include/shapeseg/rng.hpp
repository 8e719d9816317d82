#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so per-slot and per-instance streams do not depend on
// evaluation order and results are identical across platforms.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace shapeseg {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return hash_combine(hash_combine(a, b), c);
}

/// Uniform double in [0, 1) from 53 high-quality bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stateless draws addressed by counter.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  constexpr std::uint64_t bits(std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
    return hash_combine(key_, counter, lane);
  }
  constexpr double uniform(std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
    return to_unit(bits(counter, lane));
  }
  /// Standard normal via Box-Muller on lanes (lane, lane + 1).
  double normal(std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
    const double u1 = 1.0 - uniform(counter, lane);  // (0, 1]
    const double u2 = uniform(counter, lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential view over a counter stream, for generators that draw an
/// unknown number of values.
class Stream {
 public:
  explicit Stream(std::uint64_t key) noexcept : rng_(key) {}

  double uniform() noexcept { return rng_.uniform(next_++); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(rng_.bits(next_++) % span);
  }
  double normal() noexcept {
    const double z = rng_.normal(next_);
    next_ += 1;
    return z;
  }
  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  CounterRng rng_;
  std::uint64_t next_ = 0;
};

}  // namespace shapeseg
