#pragma once

#include <cstdint>
#include <initializer_list>

namespace radnet {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of words into one well-mixed stream key.
inline constexpr std::uint64_t mix_key(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

/// Counter-based generator: the n-th draw of a stream is a pure function of
/// (key, n), so streams can be created anywhere without shared state.
/// Distributions are computed here rather than with <random> distributions,
/// whose outputs are implementation-defined.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t next_u64() {
    return splitmix64(key_ ^ splitmix64(counter_++));
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  constexpr bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform integer in [0, n) via multiply-shift.
  constexpr std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace radnet
