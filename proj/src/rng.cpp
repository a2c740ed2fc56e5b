#include "gravis/rng.hpp"

#include <cmath>

namespace gravis {

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  // Fixed-point multiply; the 2^-64 bias is irrelevant here.
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

bool Rng::bernoulli(double p) { return next_double() < p; }

double Rng::normal() {
  // Box-Muller. u1 is kept away from 0 so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(a);
  h ^= mix64(b) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  return mix64(h);
}

std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return hash_seed(hash_seed(a, b), c);
}

std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d) {
  return hash_seed(hash_seed(a, b, c), d);
}

}  // namespace gravis
