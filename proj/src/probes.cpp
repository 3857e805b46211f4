#include "proxgap/probes.hpp"

#include "proxgap/error.hpp"
#include "proxgap/oracles.hpp"
#include "proxgap/optim.hpp"

#include <cmath>

namespace proxgap {

void DeviationOptions::validate() const {
  require(steps >= 1, "DeviationOptions: steps must be positive");
  require(lr > 0, "DeviationOptions: lr must be positive");
  require(eval_every >= 0, "DeviationOptions: eval_every must be nonnegative");
  require(batch_size >= 1, "DeviationOptions: batch_size must be positive");
  require(bins >= 1, "DeviationOptions: bins must be positive");
}

DeviationTrace unilateral_deviation(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                                    const Eigen::VectorXd& theta_g, const GapData& data,
                                    const DeviationOptions& opts, Rng rng,
                                    const GeneratorDivergence& divergence) {
  opts.validate();
  DeviationTrace trace;
  const auto record = [&](int step, const Eigen::VectorXd& g) {
    DeviationPoint p{step, game_value(game, theta_d, g, data.evaluation), std::nullopt};
    if (divergence) p.divergence = divergence(g);
    if (!std::isfinite(p.v) || (p.divergence && !std::isfinite(*p.divergence)))
      throw NumericalError("unilateral_deviation: non-finite value at step " + std::to_string(step));
    trace.points.push_back(p);
  };

  Eigen::VectorXd g = theta_g;
  record(0, g);
  if (opts.eval_every == 0) return trace;

  MinibatchStream stream(data.search, data.latent_dim, opts.batch_size, std::move(rng));
  auto adam = AdamState<>::fresh(g.size(), opts.lr, opts.adam_beta1, opts.adam_beta2);
  for (int step = 1; step <= opts.steps; ++step) {
    const Batch b = stream.next();
    const Loss descent = [&](ad::Tape& t, const ad::Var& th) {
      return game.value(t, t.constant(theta_d), th, b);
    };
    try {
      g = game.project_generator(adam_step(g, grad_params(descent, g), adam));
    } catch (const NumericalError& e) {
      throw NumericalError("unilateral_deviation: step " + std::to_string(step) + ": " + e.what());
    }
    if (step % opts.eval_every == 0 || step == opts.steps) record(step, g);
  }
  return trace;
}

DeviationTrace unilateral_deviation(const GanState& state, const DataSplits& splits,
                                    const DeviationOptions& opts, const Rng& rng) {
  state.validate();
  require(splits.train.rows() > 0 && splits.evaluation.rows() > 0,
          "unilateral_deviation: training and evaluation splits must be non-empty");
  const GanGame game(state);
  GapData data = make_gap_data(splits, state.latent_dim(), rng.fork(1));
  data.search = splits.train;

  const Box box{(splits.evaluation.colwise().minCoeff().array() - 1.0).transpose(),
                (splits.evaluation.colwise().maxCoeff().array() + 1.0).transpose()};
  const GeneratorDivergence jsd = [&](const Eigen::VectorXd& g) {
    const Eigen::MatrixXd fake = forward(state.g_spec, g, data.evaluation.latent);
    return jsd_from_samples(fake, splits.evaluation, opts.bins, box);
  };
  return unilateral_deviation(game, state.theta_d.values(), state.theta_g.values(), data, opts,
                              rng.fork(2), jsd);
}

std::string agent_name(Agent agent) {
  return agent == Agent::generator ? "generator" : "discriminator";
}

Agent parse_agent(const std::string& name) {
  if (name == "generator") return Agent::generator;
  if (name == "discriminator") return Agent::discriminator;
  throw PreconditionError("unknown agent '" + name + "'");
}

void SpectrumOptions::validate() const {
  require(k >= 1, "SpectrumOptions: k must be positive");
  require(max_iters >= 1, "SpectrumOptions: max_iters must be positive");
  require(eig_tol > 0 && nash_tol >= 0, "SpectrumOptions: tolerances must be positive");
  require(batch_rows >= 1, "SpectrumOptions: batch_rows must be positive");
}

double probe_hvp_step(const Eigen::VectorXd& params) { return 1e-4 * (1.0 + params.norm()); }

SpectrumReport spectrum_probe(const Loss& loss, const Eigen::VectorXd& params, Agent agent,
                              const SpectrumOptions& opts, Rng& rng) {
  opts.validate();
  require(opts.k <= params.size(), "spectrum_probe: k exceeds the parameter count");
  const double h = probe_hvp_step(params);
  const LinearOperator op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (v.norm() <= 1e-10) return Eigen::VectorXd::Zero(v.size());
    return hvp(loss, params, v, h);
  };
  const auto est = top_k_eigenvalues(op, params.size(), opts.k, opts.max_iters, opts.eig_tol, rng);

  SpectrumReport r;
  r.eigenvalues = est.values;
  r.agent = agent;
  r.tol = opts.nash_tol;
  r.iterations = est.iterations;
  r.converged = est.converged;
  r.nash_consistent = true;
  for (double e : r.eigenvalues)
    if (agent == Agent::generator ? e < -r.tol : e > r.tol) r.nash_consistent = false;
  return r;
}

SpectrumReport hessian_spectrum_probe(const GanState& state, const DataSplits& splits, Agent agent,
                                      const SpectrumOptions& opts, const Rng& rng) {
  state.validate();
  opts.validate();
  require(splits.evaluation.rows() > 0, "hessian_spectrum_probe: empty evaluation split");
  for (const auto* spec : {&state.d_spec, &state.g_spec})
    require(spec->hidden_widths.empty() || spec->activation.kind == ActivationKind::tanh,
            "hessian_spectrum_probe: tanh activations required");

  Rng batch_rng = rng.fork(1);
  Batch batch;
  batch.real.resize(opts.batch_rows, splits.evaluation.cols());
  for (Eigen::Index i = 0; i < opts.batch_rows; ++i)
    batch.real.row(i) = splits.evaluation.row(
        static_cast<Eigen::Index>(batch_rng.index(static_cast<std::size_t>(splits.evaluation.rows()))));
  batch.latent = batch_rng.normal_matrix(opts.batch_rows, state.latent_dim());

  const GanGame game(state);
  const Eigen::VectorXd d = state.theta_d.values(), g = state.theta_g.values();
  Loss loss;
  if (agent == Agent::generator)
    loss = [&](ad::Tape& t, const ad::Var& th) { return game.value(t, t.constant(d), th, batch); };
  else
    loss = [&](ad::Tape& t, const ad::Var& th) { return game.value(t, th, t.constant(g), batch); };
  Rng eig_rng = rng.fork(2);
  return spectrum_probe(loss, agent == Agent::generator ? g : d, agent, opts, eig_rng);
}

}  // namespace proxgap
