#pragma once

// Seeded random streams.
//
// Every stream is an std::mt19937_64 seeded with a 64-bit key. Child streams
// are derived from (parent key, index) through a splitmix64 finalizer, so a
// stream for (trial, client, rollout) depends only on the master seed and the
// indices, never on how many numbers other streams consumed.
//
// Uniform doubles use the top 53 bits of one engine output. Standard normals
// use the cosine branch of Box-Muller on two consecutive uniforms:
//   z = sqrt(-2 ln u1) * cos(2 pi u2),  u1 in (0, 1], u2 in [0, 1).
// The transform is spelled out so that other implementations can reproduce
// the statistics of a run.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fedsysid {

/// splitmix64 output function applied to a single value.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a child key from a parent key and an index.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Named sub-streams of a trial.
enum class Stream : std::uint64_t {
  kEnsemble = 0x454E53ULL,       // "ENS"
  kData = 0x444154ULL,           // "DAT"
  kParticipation = 0x504152ULL,  // "PAR"
  kTrial = 0x545249ULL,          // "TRI"
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream; does not advance this stream.
  Rng fork(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }
  Rng fork(Stream stream) const { return fork(static_cast<std::uint64_t>(stream)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal draw.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Reject the short tail of the 64-bit range so the draw is unbiased.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace fedsysid
