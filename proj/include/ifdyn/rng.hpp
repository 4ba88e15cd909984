#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace ifdyn {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a stream key from a master seed and a path of stream ids.
/// Keys for different paths are unrelated, so (seed, replica) and
/// (seed, replica, block) streams never overlap.
constexpr std::uint64_t derive_key(std::uint64_t seed) noexcept { return mix64(seed + 0x9e3779b97f4a7c15ULL); }

template <typename... Ids>
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t id, Ids... rest) noexcept {
  return derive_key(mix64(derive_key(seed) ^ mix64(id + 0x632be59bd9b4e019ULL)), rest...);
}

/// Counter-based generator: output n is a pure function of (key, n), which
/// makes streams reproducible across platforms and cheap to split.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

  template <typename... Ids>
  static CounterRng stream(std::uint64_t seed, Ids... ids) noexcept {
    return CounterRng(derive_key(seed, static_cast<std::uint64_t>(ids)...));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t c = counter_++;
    return mix64(mix64(key_ ^ (c * 0xd1342543de82ef95ULL)) + c);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_open() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

  /// Standard normal via Box-Muller (no cached second value, so the output
  /// stays a pure function of the counter).
  double normal() noexcept {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    return r * std::cos(6.283185307179586 * uniform());
  }

  /// Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

  CounterRng split(std::uint64_t id) const noexcept { return CounterRng(derive_key(key_, id)); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ifdyn
