#pragma once

#include <cstdint>
#include <initializer_list>

namespace imda {

/// xorshift64* generator.
///
/// State update: x ^= x >> 12; x ^= x << 25; x ^= x >> 27; output x * 0x2545F4914F6CDD1D.
/// Seeding runs the 64-bit seed through one splitmix64 step; a zero state is
/// replaced by 0x9E3779B97F4A7C15. Doubles take the top 53 output bits.
/// Every random draw in the project (init, shuffling, augmentation,
/// oversampling, splitting) goes through this generator so that other
/// implementations can reproduce runs bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, bound). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a tuple of
/// integers (epoch, position, ...), folding each part through splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

}  // namespace imda
