#pragma once

#include <cstdint>
#include <random>

namespace rantwin {

// Seeded generator with distribution transforms written out explicitly, so a
// given seed yields the same stream on every standard library (the std::
// distributions are implementation-defined). Bit-identical results still
// assume IEEE-754 doubles and a libm whose log/sqrt/cos agree.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Box-Muller; consumes exactly two uniforms per call.
  double normal(double mean = 0.0, double stddev = 1.0);

  double exponential(double mean);

  // Derives an independent child seed; used to give subsystems their own
  // stream without coupling their consumption order.
  std::uint64_t fork_seed() { return next_u64() ^ 0x9e3779b97f4a7c15ULL; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

// In-place Fisher-Yates using Rng::uniform_index.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    using std::swap;
    swap(first[i], first[j]);
  }
}

}  // namespace rantwin
