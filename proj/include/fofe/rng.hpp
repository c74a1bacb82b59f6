#ifndef FOFE_RNG_HPP
#define FOFE_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace fofe {

// Deterministic RNG used everywhere randomness is needed.  All derived
// draws (doubles, bounded ints, shuffles) are implemented here rather
// than with <random> distributions, whose output is not pinned down by
// the standard; given a seed, every platform produces the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n), unbiased via rejection.
  std::size_t next_index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
  }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_index(i)]);
    }
  }

  // Independent child stream, for components that must not perturb the
  // parent's draw sequence.
  Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ull); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fofe

#endif  // FOFE_RNG_HPP
