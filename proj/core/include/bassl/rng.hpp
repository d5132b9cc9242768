#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace bassl {

// Splittable counter-based generator. Every stochastic operation takes an
// explicit stream, and child streams derived by split() are independent of
// how much the parent has been consumed, so results are reproducible even
// when work items are processed out of order or on different threads.
class Rng {
 public:
  explicit Rng(uint64_t seed) : key_(mix(seed ^ kKeyTweak)) {}

  Rng split(uint64_t salt) const { return Rng(key_, salt); }

  Rng split(std::string_view name) const { return split(fnv1a(name)); }

  uint64_t next_u64() { return mix(key_ + kGolden * ++ctr_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two words per draw.
  double gaussian() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n). n must be > 0.
  size_t index(size_t n) {
    return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(index(static_cast<size_t>(hi - lo + 1)));
  }

 private:
  Rng(uint64_t parent_key, uint64_t salt) : key_(mix(parent_key ^ mix(salt + kSplitTweak))) {}

  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr uint64_t kKeyTweak = 0xD1B54A32D192ED03ull;
  static constexpr uint64_t kSplitTweak = 0x8CB92BA72F3D8DD7ull;

  static constexpr uint64_t mix(uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static constexpr uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  uint64_t key_;
  uint64_t ctr_ = 0;
};

}  // namespace bassl
