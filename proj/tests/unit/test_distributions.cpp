#include "doctest.h"
#include "test_support.hpp"

#include "proxgap/distributions.hpp"
#include "proxgap/error.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

using namespace proxgap;
using proxgap::testing::trapezoid_2d;

namespace {

SyntheticDist two_mode() {
  GaussianMixture m;
  m.weights = Eigen::Vector2d(0.5, 0.5);
  m.means.resize(2, 2);
  m.means << -1.5, 0.0, 1.5, 0.0;
  m.variances = Eigen::MatrixXd::Constant(2, 2, 0.09);
  return SyntheticDist(m);
}

SyntheticDist lopsided() {
  GaussianMixture m;
  m.weights = Eigen::Vector3d(0.2, 0.3, 0.5);
  m.means.resize(3, 2);
  m.means << 0.0, 1.0, -1.0, -0.5, 0.8, 0.2;
  m.variances.resize(3, 2);
  m.variances << 0.3, 0.1, 0.2, 0.4, 0.05, 0.2;
  return SyntheticDist(m);
}

}  // namespace

TEST_CASE("construction validates mixture parameters") {
  GaussianMixture m;
  m.weights = Eigen::Vector2d(0.7, 0.7);
  m.means = Eigen::MatrixXd::Zero(2, 1);
  m.variances = Eigen::MatrixXd::Ones(2, 1);
  CHECK_THROWS_AS(SyntheticDist{m}, PreconditionError);
  m.weights = Eigen::Vector2d(0.5, 0.5);
  m.variances(1, 0) = 0.0;
  CHECK_THROWS_AS(SyntheticDist{m}, PreconditionError);
}

TEST_CASE("sample_real moments and ring concentration") {
  Rng rng(1);
  const auto x = sample_real(SyntheticDist::standard_normal(2), 100000, rng);
  CHECK(x.colwise().mean().cwiseAbs().maxCoeff() < 0.02);

  const SyntheticDist ring(Ring{8, 2.0, 0.05});
  const auto r = sample_real(ring, 5000, rng);
  const auto& means = ring.mixture().means;
  int close = 0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const double d = (means.rowwise() - r.row(i)).rowwise().norm().minCoeff();
    close += d < 0.5;
  }
  CHECK(close >= 0.99 * r.rows());

  CHECK_THROWS_AS(sample_real(ring, 0, rng), PreconditionError);
}

TEST_CASE("sample_real respects mixture weights") {
  Rng rng(2);
  const auto d = lopsided();
  const auto x = sample_real(d, 20000, rng);
  // Third component sits alone at x0 > 0.5 with high probability.
  const double frac = (x.col(0).array() > 0.5).cast<double>().mean();
  CHECK(frac > 0.4);
  CHECK(frac < 0.62);
}

TEST_CASE("log_density values") {
  CHECK(log_density(SyntheticDist::standard_normal(2), Eigen::Vector2d::Zero()) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-12));

  const auto d = two_mode();
  for (double a : {0.1, 0.7, 1.5, 3.0}) {
    const Eigen::Vector2d x(a, 0.3 * a);
    CHECK(log_density(d, x) == doctest::Approx(log_density(d, -x)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(log_density(d, Eigen::Vector3d::Zero()), PreconditionError);
}

TEST_CASE("ring density equals its mixture density exactly") {
  const Ring ring{8, 2.0, 0.05};
  const SyntheticDist as_ring(ring);
  const SyntheticDist as_gmm(ring_mixture(ring));
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d x = 2.5 * rng.normal_matrix(2, 1).col(0);
    CHECK(log_density(as_ring, x) == log_density(as_gmm, x));
  }
}

TEST_CASE("property: every shipped distribution integrates to one on a 6-sigma box") {
  const std::vector<std::tuple<SyntheticDist, double, int>> cases = {
      {SyntheticDist::standard_normal(2), 6.0, 241},
      {two_mode(), 1.5 + 6 * 0.3, 241},
      {lopsided(), 1.0 + 6 * std::sqrt(0.4), 301},
      {SyntheticDist(Ring{8, 2.0, 0.05}), 2.0 + 6 * 0.05, 601},
  };
  for (const auto& [dist, half, n] : cases) {
    const double mass = trapezoid_2d(
        [&](double a, double b) { return density(dist, Eigen::Vector2d(a, b)); }, -half, half,
        -half, half, n);
    CHECK(std::abs(mass - 1.0) < 1e-3);
  }
}

TEST_CASE("sample_latent moments and determinism") {
  Rng a(9), b(9);
  const auto z = sample_latent(LatentSpec{3}, 10000, a);
  CHECK(z == sample_latent(LatentSpec{3}, 10000, b));
  const double bound = 3.0 / std::sqrt(10000.0);
  CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < bound);
  const Eigen::RowVectorXd var = (z.rowwise() - z.colwise().mean()).array().square().colwise().mean();
  CHECK((var.array() - 1.0).abs().maxCoeff() < 0.05);
  CHECK_THROWS_AS(sample_latent(LatentSpec{0}, 10, a), PreconditionError);
}

TEST_CASE("make_splits sizes, disjointness and determinism") {
  const auto d = two_mode();
  Rng rng(4);
  for (auto [na, nb, nc] : {std::tuple{800, 100, 100}, std::tuple{1, 1, 1}, std::tuple{37, 5, 211}}) {
    const auto s = make_splits(d, na, nb, nc, rng);
    CHECK(s.train.rows() == na);
    CHECK(s.search.rows() == nb);
    CHECK(s.evaluation.rows() == nc);
    std::set<std::pair<double, double>> seen;
    for (const auto* m : {&s.train, &s.search, &s.evaluation})
      for (Eigen::Index i = 0; i < m->rows(); ++i) seen.insert({(*m)(i, 0), (*m)(i, 1)});
    CHECK(seen.size() == static_cast<std::size_t>(na + nb + nc));
  }

  Rng x(5), y(5);
  const auto s1 = make_splits(d, 200, 5000, 5000, x);
  const auto s2 = make_splits(d, 200, 5000, 5000, y);
  CHECK(s1.search.rows() == 5000);
  CHECK(s1.evaluation.rows() == 5000);
  CHECK(s1.train == s2.train);
  CHECK(s1.evaluation == s2.evaluation);
  CHECK_THROWS_AS(make_splits(d, 0, 1, 1, x), PreconditionError);
}
