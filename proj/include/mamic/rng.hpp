#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mamic {

// Deterministic RNG wrapper. All randomness in the project flows through
// this class; distributions are hand-rolled so results do not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller. Two engine draws per call, no cached
  // spare, so the draw sequence is a pure function of call order.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Derives an independent child stream by consuming one draw.
  Rng fork() { return Rng(engine_()); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Splits a run seed into named component streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream_id) {
  std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace mamic
