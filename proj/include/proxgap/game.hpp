#pragma once

#include "proxgap/ad.hpp"
#include "proxgap/objectives.hpp"

#include <Eigen/Core>

namespace proxgap {

/// Zero-sum game seen through the flat parameters of each player. The
/// discriminator maximizes value(), the generator minimizes it.
class AdversarialGame {
public:
  virtual ~AdversarialGame() = default;

  virtual ad::Var value(ad::Tape& tape, const ad::Var& theta_d, const ad::Var& theta_g,
                        const Batch& batch) const = 0;

  /// Squared function-space distance between the discriminator at theta_d
  /// and at `anchor`; the proximal penalty is lambda times this.
  virtual ad::Var discriminator_distance_sq(ad::Tape& tape, const ad::Var& theta_d,
                                            const Eigen::VectorXd& anchor,
                                            const Batch& batch) const = 0;

  /// Feasible-set projections applied after every update.
  virtual Eigen::VectorXd project_discriminator(Eigen::VectorXd theta) const { return theta; }
  virtual Eigen::VectorXd project_generator(Eigen::VectorXd theta) const { return theta; }
};

/// Squared Sobolev distance between two discriminators over a batch:
/// (1/n) sum_i |∇_x D_1(x_i) - ∇_x D_2(x_i)|^2, input gradients by central
/// differences with step h. Differentiable in theta_1.
ad::Var sobolev_dist_sq(const NetworkSpec& d_spec, const ad::Var& theta_1,
                        const Eigen::VectorXd& theta_2, const Eigen::MatrixXd& x_batch, double h);
double sobolev_dist_sq(const NetworkSpec& d_spec, const Eigen::VectorXd& theta_1,
                       const Eigen::VectorXd& theta_2, const Eigen::MatrixXd& x_batch, double h);

/// A GAN objective as an AdversarialGame; the discriminator distance is the
/// Sobolev distance over the batch's real rows.
class GanGame final : public AdversarialGame {
public:
  GanGame(NetworkSpec d_spec, NetworkSpec g_spec, ObjectiveKind objective, double sobolev_h);
  explicit GanGame(const GanState& state, double sobolev_h = 1e-3);

  ad::Var value(ad::Tape& tape, const ad::Var& theta_d, const ad::Var& theta_g,
                const Batch& batch) const override;
  ad::Var discriminator_distance_sq(ad::Tape& tape, const ad::Var& theta_d,
                                    const Eigen::VectorXd& anchor,
                                    const Batch& batch) const override;
  Eigen::VectorXd project_discriminator(Eigen::VectorXd theta) const override;

  const NetworkSpec& d_spec() const { return d_spec_; }
  const NetworkSpec& g_spec() const { return g_spec_; }
  const ObjectiveKind& objective() const { return objective_; }

private:
  NetworkSpec d_spec_;
  NetworkSpec g_spec_;
  ObjectiveKind objective_;
  double sobolev_h_;
};

}  // namespace proxgap
