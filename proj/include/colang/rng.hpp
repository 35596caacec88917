#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

#include "colang/matrix.hpp"

namespace colang {

// Fixed sub-stream offsets derived from a master seed. Toggling the
// temperature must not perturb minibatch order, so every consumer draws from
// its own stream.
enum class Stream : std::uint64_t {
  Init = 1,
  Batch = 2,
  Noise = 3,
  TrainData = 4,
  TestData = 5,
};

// xoshiro256++ with splitmix64 seeding. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);
  static Rng stream(std::uint64_t master_seed, Stream which);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  void fill_normal(std::span<double> out);

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_ = 0;
};

Matrix standard_normal_matrix(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace colang
