#pragma once

#include <cstdint>
#include <random>

namespace cpm {

// Platform-stable random source. std::uniform_real_distribution is
// implementation-defined, so doubles are built directly from the 64-bit
// Mersenne Twister output, which the standard pins bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t Index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; deterministic given the engine state.
  double Normal();

  std::uint64_t Next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Mixes a seed with a stream key (e.g. a vocabulary index) so that
// independent streams can be derived without sharing engine state.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t key);

}  // namespace cpm
