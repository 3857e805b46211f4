#pragma once

#include "proxgap/distributions.hpp"
#include "proxgap/game.hpp"
#include "proxgap/objectives.hpp"
#include "proxgap/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace proxgap {

struct ProximalConfig {
  double lambda = 0.1;
  /// Gradient-ascent steps inside prox_opt (T).
  int prox_steps = 20;
  double prox_lr = 0.05;
  /// Iterations of each worst-case search (N_ITER).
  int worst_iters = 80;
  double worst_lr = 5e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double sobolev_h = 1e-3;
  Eigen::Index batch_size = 64;

  void validate() const;
};

/// Worst-case iterations covering `epochs` passes over a pool of `pool_size`
/// rows in minibatches of `batch_size`.
int epochs_to_iters(double epochs, Eigen::Index pool_size, Eigen::Index batch_size);

struct GapReport {
  double v_dw = 0;
  double v_gw_lambda = 0;
  double dg_lambda = 0;
  double v_gw_plain = 0;
  double dg_plain = 0;
  double lambda = 0;
  int worst_iters = 0;
  int prox_steps = 0;
  std::uint64_t seed = 0;
};

/// Minibatches drawn from a pool by shuffled passes, each paired with fresh
/// latent codes. An empty pool yields empty batches (parameter-only games).
class MinibatchStream {
public:
  MinibatchStream(const Eigen::MatrixXd& pool, Eigen::Index latent_dim, Eigen::Index batch_size,
                  Rng rng);
  Batch next();

private:
  const Eigen::MatrixXd* pool_;
  Eigen::Index latent_dim_;
  Eigen::Index batch_size_;
  Rng rng_;
  std::vector<Eigen::Index> order_;
  std::size_t cursor_ = 0;
};

/// What the estimators need besides the configuration: the search pool and a
/// fixed evaluation batch.
struct GapData {
  Eigen::MatrixXd search;
  Batch evaluation;
  Eigen::Index latent_dim = 0;
};

/// Search pool S_B, evaluation rows S_C, and a fixed latent batch of the
/// same size drawn from `eval_rng`.
GapData make_gap_data(const DataSplits& splits, Eigen::Index latent_dim, Rng eval_rng);

struct ProxResult {
  Eigen::VectorXd theta_d;
  double value = 0;
  /// Number of step halvings needed to keep the ascent monotone.
  int halvings = 0;
};

/// Gradient ascent on V(θ̃, θ_g) - λ·dist²(θ̃, anchor) for cfg.prox_steps
/// steps from the anchor. A step that would decrease the objective (or leave
/// the finite range) is halved until it does not; this keeps large λ stable
/// and makes the result at least V(anchor, θ_g).
ProxResult prox_opt(const AdversarialGame& game, const Eigen::VectorXd& anchor,
                    const Eigen::VectorXd& theta_g, const Batch& batch,
                    const ProximalConfig& cfg);

double game_value(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                  const Eigen::VectorXd& theta_g, const Batch& batch);

/// max over θ_d' of V(θ_d', θ_g): Adam ascent on search minibatches, scored
/// on the evaluation batch.
double estimate_v_dw(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                     const Eigen::VectorXd& theta_g, const GapData& data,
                     const ProximalConfig& cfg, Rng rng);

/// min over θ_g' of V^λ(θ_d, θ_g'): each iteration re-solves prox_opt
/// anchored at the original θ_d and takes one Adam descent step on
/// V(θ_d*, ·); the final prox_opt runs on the evaluation batch.
double estimate_v_gw_lambda(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                            const Eigen::VectorXd& theta_g, const GapData& data,
                            const ProximalConfig& cfg, Rng rng);

/// min over θ_g' of V(θ_d, θ_g') with θ_d frozen.
double estimate_v_gw_plain(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                           const Eigen::VectorXd& theta_g, const GapData& data,
                           const ProximalConfig& cfg, Rng rng);

/// All three estimators with shared seeds: both generator searches consume
/// the same minibatch stream.
GapReport duality_gap(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                      const Eigen::VectorXd& theta_g, const GapData& data,
                      const ProximalConfig& cfg, const Rng& rng);

struct SweepPoint {
  double lambda;
  GapReport report;
};

/// duality_gap per λ with identical seeds; ascending in λ.
std::vector<SweepPoint> lambda_sweep(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                                     const Eigen::VectorXd& theta_g, const GapData& data,
                                     std::vector<double> lambdas, const ProximalConfig& cfg,
                                     const Rng& rng);

// GanState conveniences: the evaluation latent batch is drawn from rng.fork(1).

double estimate_v_dw(const GanState& state, const DataSplits& splits, const ProximalConfig& cfg,
                     const Rng& rng);
double estimate_v_gw_lambda(const GanState& state, const DataSplits& splits,
                            const ProximalConfig& cfg, const Rng& rng);
double estimate_v_gw_plain(const GanState& state, const DataSplits& splits,
                           const ProximalConfig& cfg, const Rng& rng);
GapReport duality_gap(const GanState& state, const DataSplits& splits, const ProximalConfig& cfg,
                      const Rng& rng);
std::vector<SweepPoint> lambda_sweep(const GanState& state, const DataSplits& splits,
                                     std::vector<double> lambdas, const ProximalConfig& cfg,
                                     const Rng& rng);

}  // namespace proxgap
