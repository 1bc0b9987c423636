#pragma once

#include <cmath>
#include <cstdint>

namespace frameflow {

/// Counter-based random number generator.  Every draw is a pure function of
/// (seed, stream, counter), so ensembles are reproducible bit for bit no
/// matter how work is scheduled across threads.  The word function chains
/// the splitmix64 finalizer over the key components.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t word(std::uint64_t stream, std::uint64_t counter) const {
    std::uint64_t h = mix(seed_ + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ (stream + 0xbf58476d1ce4e5b9ULL));
    h = mix(h ^ (counter + 0x94d049bb133111ebULL));
    return h;
  }

  /// Uniform draw in the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return (static_cast<double>(word(stream, counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal draw, Box-Muller on two dedicated uniforms.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    const double u1 = uniform(stream, 2 * counter);
    const double u2 = uniform(stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace frameflow
