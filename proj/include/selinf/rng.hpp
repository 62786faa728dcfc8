#pragma once

#include <cmath>
#include <cstdint>

namespace selinf {

/// Counter-based pseudo-random stream. A stream is identified by a key
/// derived from up to three 64-bit identifiers (master seed, scenario id,
/// replication id); the i-th draw is a pure function of (key, i). Streams
/// keyed differently are independent for simulation purposes, and a given
/// stream replays identically regardless of which thread consumes it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0,
               std::uint64_t substream = 0)
      : key_(derive_key(seed, stream, substream)) {}

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return to_unit(next()); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;

  std::uint64_t next() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  static double to_unit(std::uint64_t v) {
    return static_cast<double>(v >> 11) * 0x1.0p-53;
  }

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t a, std::uint64_t b,
                                  std::uint64_t c) {
    std::uint64_t k = mix(a + 0x8BADF00D5EEDULL);
    k = mix(k ^ (b + 0x9E3779B97F4A7C15ULL));
    k = mix(k ^ (c + 0xD1B54A32D192ED03ULL));
    return k;
  }
};

}  // namespace selinf
