#pragma once

#include <cstdint>
#include <random>

namespace lel {

// Seeded random source. One instance belongs to exactly one trajectory.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  double lognormal(double mu, double sigma);
  std::uint64_t next() { return engine_(); }

  // Derive an independent child seed (splitmix64 of the parent seed and a tag).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace lel
