#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace segdiscover {

/// Seeded random stream. Sub-streams are derived with split(), so the
/// sample sequence of a given (seed, key path) never depends on how many
/// draws other streams have made.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::uint64_t key) const;
  std::uint64_t seed() const { return seed_; }

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::numeric_limits<result_type>::min(); }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on the open interval (0, 1); safe to feed into log().
  double uniform_open();
  double uniform(double lo, double hi);
  double normal();
  /// Standard Gumbel(0, 1) draw.
  double gumbel();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

}  // namespace segdiscover
