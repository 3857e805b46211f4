#pragma once

#include "proxgap/rng.hpp"

#include <Eigen/Core>

#include <variant>

namespace proxgap {

/// Mixture of axis-aligned Gaussians; row i of `means` / `variances` is
/// component i.
struct GaussianMixture {
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  Eigen::MatrixXd variances;
};

/// `mode_count` isotropic modes equally spaced on a circle in the plane,
/// starting at angle 0.
struct Ring {
  int mode_count = 8;
  double radius = 2.0;
  double sigma = 0.05;
};

class SyntheticDist {
public:
  explicit SyntheticDist(GaussianMixture mixture);
  explicit SyntheticDist(Ring ring);

  static SyntheticDist standard_normal(Eigen::Index dim);

  Eigen::Index dimension() const;
  /// The equivalent mixture; a Ring expands to equal-weight components.
  const GaussianMixture& mixture() const { return mixture_; }
  const std::variant<GaussianMixture, Ring>& variant() const { return variant_; }

private:
  std::variant<GaussianMixture, Ring> variant_;
  GaussianMixture mixture_;
};

GaussianMixture ring_mixture(const Ring& ring);

/// n i.i.d. draws, one row each.
Eigen::MatrixXd sample_real(const SyntheticDist& dist, Eigen::Index n, Rng& rng);

/// Exact log of the mixture density (log-sum-exp over components).
double log_density(const SyntheticDist& dist, const Eigen::Ref<const Eigen::VectorXd>& x);
double density(const SyntheticDist& dist, const Eigen::Ref<const Eigen::VectorXd>& x);

struct LatentSpec {
  Eigen::Index dim = 2;
};

/// Standard normal latent codes, n x dim.
Eigen::MatrixXd sample_latent(const LatentSpec& spec, Eigen::Index n, Rng& rng);

/// Three disjoint sample sets: `train` fits the model, `search` drives the
/// worst-case searches, `evaluation` scores the searched configurations.
struct DataSplits {
  Eigen::MatrixXd train;
  Eigen::MatrixXd search;
  Eigen::MatrixXd evaluation;
};

DataSplits make_splits(const SyntheticDist& dist, Eigen::Index n_train, Eigen::Index n_search,
                       Eigen::Index n_eval, Rng& rng);

}  // namespace proxgap
