#include "proxgap/rng.hpp"

#include "proxgap/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace proxgap {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  require(n > 0, "Rng::index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Eigen::MatrixXd Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order so that a prefix of rows is a stable sample.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Rng Rng::fork(std::uint64_t stream_id) const {
  return Rng(mix_seed(seed_ ^ mix_seed(stream_id + 0x5851f42d4c957f2dULL)));
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::deserialize(std::uint64_t seed, const std::string& state) {
  Rng rng(seed);
  std::istringstream is(state);
  is >> rng.engine_;
  if (!is) throw PreconditionError("Rng::deserialize: malformed engine state");
  return rng;
}

}  // namespace proxgap
