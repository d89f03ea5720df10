#include "lel/random.h"

#include <cmath>

namespace lel {

double Rng::lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace lel
