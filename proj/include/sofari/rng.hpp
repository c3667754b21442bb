#pragma once

#include <cmath>
#include <cstdint>

namespace sofari {

// Counter-based SplitMix64: the i-th draw of stream (seed, stream) is
// mix64(key + i * golden) with key = mix64(seed ^ mix64(stream + golden)).
// Draws are a pure function of (seed, stream, counter), so replications can
// be generated on any worker in any order.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(seed ^ mix64(stream + kGolden))) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Marsaglia polar method; deterministic across platforms given IEEE doubles.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a, b, s;
    do {
      a = 2.0 * uniform() - 1.0;
      b = 2.0 * uniform() - 1.0;
      s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * f;
    has_spare_ = true;
    return a * f;
  }

  // Uniform integer in [0, m) by rejection.
  std::uint64_t below(std::uint64_t m) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % m;
    std::uint64_t x;
    do x = next_u64(); while (x >= limit);
    return x % m;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Seed of replication `rep` under a master seed.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep) {
  return CounterRng::mix64(master + CounterRng::mix64(rep + 0x632BE59BD9B4E019ULL));
}

}  // namespace sofari
