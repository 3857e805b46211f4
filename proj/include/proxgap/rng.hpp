#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>

namespace proxgap {

/// Seeded random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard library distributions are not, so uniform and
/// normal variates are produced here: uniform from the top 53 bits of one
/// draw, normal by the Box-Muller transform of two uniforms (one variate per
/// call, no caching, so the state is exactly the engine state).
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Independent child stream derived from (seed, stream_id) only; does not
  /// advance this generator.
  Rng fork(std::uint64_t stream_id) const;

  /// Textual engine state, portable across platforms.
  std::string serialize() const;
  static Rng deserialize(std::uint64_t seed, const std::string& state);

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace proxgap
