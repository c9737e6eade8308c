#ifndef BEACONSIM_RNG_HPP
#define BEACONSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace beaconsim {

/// Independent sub-streams within one replication.
enum class StreamTag : std::uint32_t {
  deployment = 1,
  mobility = 2,
  shadowing = 3,
  fading = 4,
  detection = 5,
  wrong_cell = 6,
  test = 99,
};

/// Seeded random stream. Transforms are written out explicitly so that
/// a given (seed, replication, tag) produces the same draws with any
/// standard library.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t replication, StreamTag tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), replication,
                      static_cast<std::uint32_t>(tag)};
    engine_.seed(seq);
  }

  explicit RandomStream(std::uint64_t seed) : RandomStream(seed, 0, StreamTag::test) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unit-mean exponential.
  double exponential() { return -std::log1p(-uniform()); }

  double exponential(double mean) { return mean * exponential(); }

  /// Standard normal (Box-Muller, both outputs used).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace beaconsim

#endif
