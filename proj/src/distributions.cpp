#include "proxgap/distributions.hpp"

#include "proxgap/error.hpp"

#include <cmath>
#include <numbers>

namespace proxgap {

namespace {

void validate(const GaussianMixture& m) {
  const auto k = m.weights.size();
  require(k >= 1, "GaussianMixture: needs at least one component");
  require(m.means.rows() == k && m.variances.rows() == k,
          "GaussianMixture: means/variances must have one row per weight");
  require(m.means.cols() >= 1 && m.variances.cols() == m.means.cols(),
          "GaussianMixture: means and variances must share the dimension");
  require((m.weights.array() > 0).all(), "GaussianMixture: weights must be positive");
  require(std::abs(m.weights.sum() - 1.0) < 1e-9, "GaussianMixture: weights must sum to 1");
  require((m.variances.array() > 0).all(), "GaussianMixture: variances must be positive");
  require(m.means.allFinite() && m.variances.allFinite(), "GaussianMixture: non-finite parameters");
}

}  // namespace

GaussianMixture ring_mixture(const Ring& ring) {
  require(ring.mode_count >= 1, "Ring: mode_count must be positive");
  require(ring.radius >= 0 && ring.sigma > 0, "Ring: radius >= 0 and sigma > 0 required");
  GaussianMixture m;
  const auto k = ring.mode_count;
  m.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  m.means.resize(k, 2);
  for (int i = 0; i < k; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / k;
    m.means(i, 0) = ring.radius * std::cos(angle);
    m.means(i, 1) = ring.radius * std::sin(angle);
  }
  m.variances = Eigen::MatrixXd::Constant(k, 2, ring.sigma * ring.sigma);
  return m;
}

SyntheticDist::SyntheticDist(GaussianMixture mixture) : variant_(mixture), mixture_(std::move(mixture)) {
  validate(mixture_);
}

SyntheticDist::SyntheticDist(Ring ring) : variant_(ring), mixture_(ring_mixture(ring)) {
  validate(mixture_);
}

SyntheticDist SyntheticDist::standard_normal(Eigen::Index dim) {
  GaussianMixture m;
  m.weights = Eigen::VectorXd::Ones(1);
  m.means = Eigen::MatrixXd::Zero(1, dim);
  m.variances = Eigen::MatrixXd::Ones(1, dim);
  return SyntheticDist(std::move(m));
}

Eigen::Index SyntheticDist::dimension() const { return mixture_.means.cols(); }

Eigen::MatrixXd sample_real(const SyntheticDist& dist, Eigen::Index n, Rng& rng) {
  require(n >= 1, "sample_real: n must be at least 1");
  const auto& m = dist.mixture();
  const Eigen::Index dim = dist.dimension();
  const Eigen::Index k = m.weights.size();
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Eigen::Index c = 0;
    double acc = m.weights[0];
    while (u >= acc && c + 1 < k) acc += m.weights[++c];
    for (Eigen::Index j = 0; j < dim; ++j)
      out(i, j) = m.means(c, j) + std::sqrt(m.variances(c, j)) * rng.normal();
  }
  return out;
}

double log_density(const SyntheticDist& dist, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require(x.size() == dist.dimension(), "log_density: point dimension mismatch");
  const auto& m = dist.mixture();
  const Eigen::Index k = m.weights.size();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd terms(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto var = m.variances.row(c).array();
    const auto diff = x.transpose().array() - m.means.row(c).array();
    terms[c] = std::log(m.weights[c]) -
               0.5 * ((diff.square() / var).sum() + var.log().sum() + x.size() * log2pi);
  }
  const double top = terms.maxCoeff();
  return top + std::log((terms.array() - top).exp().sum());
}

double density(const SyntheticDist& dist, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::exp(log_density(dist, x));
}

Eigen::MatrixXd sample_latent(const LatentSpec& spec, Eigen::Index n, Rng& rng) {
  require(spec.dim >= 1, "sample_latent: latent dim must be at least 1");
  require(n >= 1, "sample_latent: n must be at least 1");
  return rng.normal_matrix(n, spec.dim);
}

DataSplits make_splits(const SyntheticDist& dist, Eigen::Index n_train, Eigen::Index n_search,
                       Eigen::Index n_eval, Rng& rng) {
  require(n_train >= 1 && n_search >= 1 && n_eval >= 1, "make_splits: sizes must be at least 1");
  const Eigen::MatrixXd all = sample_real(dist, n_train + n_search + n_eval, rng);
  return {all.topRows(n_train), all.middleRows(n_train, n_search), all.bottomRows(n_eval)};
}

}  // namespace proxgap
