#include "proxgap/gapmetrics.hpp"

#include "proxgap/calculus.hpp"
#include "proxgap/error.hpp"
#include "proxgap/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace proxgap {

void ProximalConfig::validate() const {
  require(lambda >= 0 && std::isfinite(lambda), "ProximalConfig: lambda must be finite and >= 0");
  require(prox_steps >= 1, "ProximalConfig: prox_steps must be positive");
  require(prox_lr > 0, "ProximalConfig: prox_lr must be positive");
  require(worst_iters >= 0, "ProximalConfig: worst_iters must be nonnegative");
  require(worst_lr > 0, "ProximalConfig: worst_lr must be positive");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
          "ProximalConfig: Adam betas must lie in [0, 1)");
  require(sobolev_h > 0, "ProximalConfig: sobolev_h must be positive");
  require(batch_size >= 1, "ProximalConfig: batch_size must be positive");
}

int epochs_to_iters(double epochs, Eigen::Index pool_size, Eigen::Index batch_size) {
  require(epochs >= 0 && pool_size >= 0 && batch_size >= 1, "epochs_to_iters: bad arguments");
  return static_cast<int>(std::ceil(epochs * static_cast<double>(pool_size) /
                                    static_cast<double>(batch_size)));
}

MinibatchStream::MinibatchStream(const Eigen::MatrixXd& pool, Eigen::Index latent_dim,
                                 Eigen::Index batch_size, Rng rng)
    : pool_(&pool), latent_dim_(latent_dim), batch_size_(batch_size), rng_(std::move(rng)) {
  require(batch_size >= 1, "MinibatchStream: batch size must be positive");
  order_.resize(static_cast<std::size_t>(pool.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  cursor_ = order_.size();
}

Batch MinibatchStream::next() {
  if (order_.empty()) return {};
  const auto n = static_cast<std::size_t>(std::min<Eigen::Index>(batch_size_, pool_->rows()));
  Batch b;
  b.real.resize(static_cast<Eigen::Index>(n), pool_->cols());
  for (std::size_t i = 0; i < n; ++i) {
    if (cursor_ == order_.size()) {
      // Fisher-Yates with the stream's own generator.
      for (std::size_t j = order_.size() - 1; j > 0; --j) std::swap(order_[j], order_[rng_.index(j + 1)]);
      cursor_ = 0;
    }
    b.real.row(static_cast<Eigen::Index>(i)) = pool_->row(order_[cursor_++]);
  }
  b.latent = rng_.normal_matrix(static_cast<Eigen::Index>(n), latent_dim_);
  return b;
}

GapData make_gap_data(const DataSplits& splits, Eigen::Index latent_dim, Rng eval_rng) {
  require(splits.search.rows() > 0 && splits.evaluation.rows() > 0,
          "make_gap_data: search and evaluation splits must be non-empty");
  GapData data;
  data.search = splits.search;
  data.evaluation.real = splits.evaluation;
  data.evaluation.latent = eval_rng.normal_matrix(splits.evaluation.rows(), latent_dim);
  data.latent_dim = latent_dim;
  return data;
}

double game_value(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                  const Eigen::VectorXd& theta_g, const Batch& batch) {
  ad::Tape tape;
  return game.value(tape, tape.constant(theta_d), tape.constant(theta_g), batch).scalar();
}

ProxResult prox_opt(const AdversarialGame& game, const Eigen::VectorXd& anchor,
                    const Eigen::VectorXd& theta_g, const Batch& batch,
                    const ProximalConfig& cfg) {
  cfg.validate();
  const Loss objective = [&](ad::Tape& tape, const ad::Var& theta) {
    const auto v = game.value(tape, theta, tape.constant(theta_g), batch);
    if (cfg.lambda == 0.0) return v;
    return v - cfg.lambda * game.discriminator_distance_sq(tape, theta, anchor, batch);
  };

  ProxResult result;
  result.theta_d = anchor;
  ValueAndGrad current;
  try {
    current = value_and_grad(objective, anchor);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("prox_opt: non-finite objective at step 0: ") + e.what());
  }

  constexpr int kMaxHalvings = 60;
  for (int step = 0; step < cfg.prox_steps; ++step) {
    double rate = cfg.prox_lr;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h, rate *= 0.5) {
      Eigen::VectorXd candidate =
          game.project_discriminator(result.theta_d + rate * current.grad);
      ValueAndGrad next;
      try {
        next = value_and_grad(objective, candidate);
      } catch (const NumericalError&) {
        ++result.halvings;
        continue;
      }
      if (next.value > current.value) {
        result.theta_d = std::move(candidate);
        current = std::move(next);
        accepted = true;
        break;
      }
      ++result.halvings;
    }
    // No ascent direction left at machine precision.
    if (!accepted) break;
  }
  result.value = current.value;
  return result;
}

namespace {

template <class F>
auto annotate(const char* where, F&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(where) + ": " + e.what());
  }
}

}  // namespace

double estimate_v_dw(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                     const Eigen::VectorXd& theta_g, const GapData& data,
                     const ProximalConfig& cfg, Rng rng) {
  cfg.validate();
  return annotate("estimate_v_dw", [&] {
    MinibatchStream stream(data.search, data.latent_dim, cfg.batch_size, std::move(rng));
    auto adam = AdamState<>::fresh(theta_d.size(), cfg.worst_lr, cfg.adam_beta1, cfg.adam_beta2);
    Eigen::VectorXd d = theta_d;
    for (int i = 0; i < cfg.worst_iters; ++i) {
      const Batch b = stream.next();
      const Loss ascent = [&](ad::Tape& t, const ad::Var& th) {
        return -game.value(t, th, t.constant(theta_g), b);
      };
      d = game.project_discriminator(adam_step(d, grad_params(ascent, d), adam));
    }
    return game_value(game, d, theta_g, data.evaluation);
  });
}

double estimate_v_gw_lambda(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                            const Eigen::VectorXd& theta_g, const GapData& data,
                            const ProximalConfig& cfg, Rng rng) {
  cfg.validate();
  return annotate("estimate_v_gw_lambda", [&] {
    MinibatchStream stream(data.search, data.latent_dim, cfg.batch_size, std::move(rng));
    auto adam = AdamState<>::fresh(theta_g.size(), cfg.worst_lr, cfg.adam_beta1, cfg.adam_beta2);
    Eigen::VectorXd g = theta_g;
    for (int i = 0; i < cfg.worst_iters; ++i) {
      const Batch b = stream.next();
      const Eigen::VectorXd d_star = prox_opt(game, theta_d, g, b, cfg).theta_d;
      const Loss descent = [&](ad::Tape& t, const ad::Var& th) {
        return game.value(t, t.constant(d_star), th, b);
      };
      g = game.project_generator(adam_step(g, grad_params(descent, g), adam));
    }
    return prox_opt(game, theta_d, g, data.evaluation, cfg).value;
  });
}

double estimate_v_gw_plain(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                           const Eigen::VectorXd& theta_g, const GapData& data,
                           const ProximalConfig& cfg, Rng rng) {
  cfg.validate();
  return annotate("estimate_v_gw_plain", [&] {
    MinibatchStream stream(data.search, data.latent_dim, cfg.batch_size, std::move(rng));
    auto adam = AdamState<>::fresh(theta_g.size(), cfg.worst_lr, cfg.adam_beta1, cfg.adam_beta2);
    Eigen::VectorXd g = theta_g;
    for (int i = 0; i < cfg.worst_iters; ++i) {
      const Batch b = stream.next();
      const Loss descent = [&](ad::Tape& t, const ad::Var& th) {
        return game.value(t, t.constant(theta_d), th, b);
      };
      g = game.project_generator(adam_step(g, grad_params(descent, g), adam));
    }
    return game_value(game, theta_d, g, data.evaluation);
  });
}

namespace {

constexpr std::uint64_t kEvalStream = 1;
constexpr std::uint64_t kDiscriminatorSearchStream = 2;
constexpr std::uint64_t kGeneratorSearchStream = 3;

}  // namespace

GapReport duality_gap(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                      const Eigen::VectorXd& theta_g, const GapData& data,
                      const ProximalConfig& cfg, const Rng& rng) {
  GapReport r;
  r.v_dw = estimate_v_dw(game, theta_d, theta_g, data, cfg, rng.fork(kDiscriminatorSearchStream));
  r.v_gw_lambda =
      estimate_v_gw_lambda(game, theta_d, theta_g, data, cfg, rng.fork(kGeneratorSearchStream));
  r.v_gw_plain =
      estimate_v_gw_plain(game, theta_d, theta_g, data, cfg, rng.fork(kGeneratorSearchStream));
  r.dg_lambda = r.v_dw - r.v_gw_lambda;
  r.dg_plain = r.v_dw - r.v_gw_plain;
  r.lambda = cfg.lambda;
  r.worst_iters = cfg.worst_iters;
  r.prox_steps = cfg.prox_steps;
  r.seed = rng.seed();
  return r;
}

std::vector<SweepPoint> lambda_sweep(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                                     const Eigen::VectorXd& theta_g, const GapData& data,
                                     std::vector<double> lambdas, const ProximalConfig& cfg,
                                     const Rng& rng) {
  require(!lambdas.empty(), "lambda_sweep: no lambda values");
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<SweepPoint> out;
  out.reserve(lambdas.size());
  // V_Dw and the plain search do not depend on λ.
  GapReport base;
  base.v_dw = estimate_v_dw(game, theta_d, theta_g, data, cfg, rng.fork(kDiscriminatorSearchStream));
  base.v_gw_plain =
      estimate_v_gw_plain(game, theta_d, theta_g, data, cfg, rng.fork(kGeneratorSearchStream));
  base.dg_plain = base.v_dw - base.v_gw_plain;
  base.worst_iters = cfg.worst_iters;
  base.prox_steps = cfg.prox_steps;
  base.seed = rng.seed();
  for (double lambda : lambdas) {
    auto c = cfg;
    c.lambda = lambda;
    GapReport r = base;
    r.lambda = lambda;
    r.v_gw_lambda =
        estimate_v_gw_lambda(game, theta_d, theta_g, data, c, rng.fork(kGeneratorSearchStream));
    r.dg_lambda = r.v_dw - r.v_gw_lambda;
    out.push_back({lambda, r});
  }
  return out;
}

namespace {

struct GanSetup {
  GanGame game;
  GapData data;
};

GanSetup gan_setup(const GanState& state, const DataSplits& splits, const ProximalConfig& cfg,
                   const Rng& rng) {
  state.validate();
  if (const auto* w = std::get_if<WassersteinClip>(&state.objective))
    require(state.theta_d.values().cwiseAbs().maxCoeff() <= w->clip * (1.0 + 1e-12),
            "WassersteinClip: discriminator parameters outside [-c, c]");
  return {GanGame(state, cfg.sobolev_h), make_gap_data(splits, state.latent_dim(), rng.fork(kEvalStream))};
}

}  // namespace

double estimate_v_dw(const GanState& state, const DataSplits& splits, const ProximalConfig& cfg,
                     const Rng& rng) {
  const auto s = gan_setup(state, splits, cfg, rng);
  return estimate_v_dw(s.game, state.theta_d.values(), state.theta_g.values(), s.data, cfg,
                       rng.fork(kDiscriminatorSearchStream));
}

double estimate_v_gw_lambda(const GanState& state, const DataSplits& splits,
                            const ProximalConfig& cfg, const Rng& rng) {
  const auto s = gan_setup(state, splits, cfg, rng);
  return estimate_v_gw_lambda(s.game, state.theta_d.values(), state.theta_g.values(), s.data, cfg,
                              rng.fork(kGeneratorSearchStream));
}

double estimate_v_gw_plain(const GanState& state, const DataSplits& splits,
                           const ProximalConfig& cfg, const Rng& rng) {
  const auto s = gan_setup(state, splits, cfg, rng);
  return estimate_v_gw_plain(s.game, state.theta_d.values(), state.theta_g.values(), s.data, cfg,
                             rng.fork(kGeneratorSearchStream));
}

GapReport duality_gap(const GanState& state, const DataSplits& splits, const ProximalConfig& cfg,
                      const Rng& rng) {
  const auto s = gan_setup(state, splits, cfg, rng);
  return duality_gap(s.game, state.theta_d.values(), state.theta_g.values(), s.data, cfg, rng);
}

std::vector<SweepPoint> lambda_sweep(const GanState& state, const DataSplits& splits,
                                     std::vector<double> lambdas, const ProximalConfig& cfg,
                                     const Rng& rng) {
  const auto s = gan_setup(state, splits, cfg, rng);
  return lambda_sweep(s.game, state.theta_d.values(), state.theta_g.values(), s.data,
                      std::move(lambdas), cfg, rng);
}

}  // namespace proxgap
