#pragma once

#include <cstdint>

namespace gravis {

// Deterministic splitmix64 stream. Parallel work items never share a stream;
// they derive one with hash_seed(master, item, ...) so results do not depend
// on execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_double();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  bool bernoulli(double p);

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

 private:
  std::uint64_t state_;
};

std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c);
std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d);

}  // namespace gravis
