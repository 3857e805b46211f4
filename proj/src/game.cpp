#include "proxgap/game.hpp"

#include "proxgap/calculus.hpp"
#include "proxgap/error.hpp"
#include "proxgap/optim.hpp"

namespace proxgap {

ad::Var sobolev_dist_sq(const NetworkSpec& d_spec, const ad::Var& theta_1,
                        const Eigen::VectorXd& theta_2, const Eigen::MatrixXd& x_batch, double h) {
  require(x_batch.rows() > 0, "sobolev_dist_sq: empty batch");
  ad::Tape& tape = theta_1.tape();
  const auto g1 = input_grad(d_spec, theta_1, x_batch, h);
  const auto g2 = input_grad(d_spec, tape.constant(theta_2), x_batch, h);
  return (1.0 / static_cast<double>(x_batch.rows())) * ad::sum(ad::square(g1 - g2));
}

double sobolev_dist_sq(const NetworkSpec& d_spec, const Eigen::VectorXd& theta_1,
                       const Eigen::VectorXd& theta_2, const Eigen::MatrixXd& x_batch, double h) {
  ad::Tape tape;
  return sobolev_dist_sq(d_spec, tape.constant(theta_1), theta_2, x_batch, h).scalar();
}

GanGame::GanGame(NetworkSpec d_spec, NetworkSpec g_spec, ObjectiveKind objective, double sobolev_h)
    : d_spec_(std::move(d_spec)),
      g_spec_(std::move(g_spec)),
      objective_(objective),
      sobolev_h_(sobolev_h) {
  require(sobolev_h_ > 0, "GanGame: Sobolev step must be positive");
}

GanGame::GanGame(const GanState& state, double sobolev_h)
    : GanGame(state.d_spec, state.g_spec, state.objective, sobolev_h) {
  state.validate();
}

ad::Var GanGame::value(ad::Tape&, const ad::Var& theta_d, const ad::Var& theta_g,
                       const Batch& batch) const {
  return objective_value(objective_, d_spec_, theta_d, g_spec_, theta_g, batch);
}

ad::Var GanGame::discriminator_distance_sq(ad::Tape&, const ad::Var& theta_d,
                                           const Eigen::VectorXd& anchor,
                                           const Batch& batch) const {
  return sobolev_dist_sq(d_spec_, theta_d, anchor, batch.real, sobolev_h_);
}

Eigen::VectorXd GanGame::project_discriminator(Eigen::VectorXd theta) const {
  if (const auto* w = std::get_if<WassersteinClip>(&objective_)) return clip_params(theta, w->clip);
  return theta;
}

}  // namespace proxgap
