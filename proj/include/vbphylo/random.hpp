#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace vbphylo {

// Deterministic RNG with named substreams: all randomness in a run flows from
// one seed, and each consumer (topology sampling, branch draws, heights, ...)
// gets an independent stream so toggling one feature does not perturb the
// draws of another. Samplers are hand-rolled so output is identical across
// standard libraries.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng substream(uint64_t seed, std::string_view name);

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return std::ldexp(static_cast<double>(engine_() >> 11), -53);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without the cached spare; two uniforms per draw.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double exponential(double rate) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(u) / rate;
  }

  uint64_t bits() { return engine_(); }

  // Uniform integer in [0, n).
  size_t uniform_index(size_t n) {
    return static_cast<size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Draw an index from an (unnormalized is fine) nonnegative weight vector.
  size_t discrete(std::span<const double> weights);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace vbphylo
