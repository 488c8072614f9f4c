#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tvq {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h = 14695981039346656037ull) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

/// Seeded random stream. All randomness in the toolkit flows from one root
/// seed, split per purpose (and per epoch / per sample where replay matters),
/// so runs are reproducible and resumable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  /// Child stream whose seed depends only on (this stream's seed, purpose).
  Rng split(std::string_view purpose) const { return Rng(fnv1a(purpose, seed_ ^ 0x9e3779b97f4a7c15ull)); }

  /// Child stream keyed by purpose and an index (epoch, sample id, run id).
  Rng split(std::string_view purpose, std::uint64_t index) const {
    return Rng(fnv1a_u64(index, fnv1a(purpose, seed_ ^ 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t seed() const { return seed_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  /// Uniform integer in [0, n).
  int randint(int n) { return std::uniform_int_distribution<int>(0, n - 1)(eng_); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace tvq
