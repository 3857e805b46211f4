#pragma once

#include "proxgap/calculus.hpp"
#include "proxgap/gapmetrics.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace proxgap {

struct DeviationPoint {
  int step = 0;
  /// V on the evaluation batch.
  double v = 0;
  /// Histogram JSD between generated and evaluation rows, when available.
  std::optional<double> divergence;
};

struct DeviationTrace {
  /// Strictly increasing steps; the first entry is step 0.
  std::vector<DeviationPoint> points;
};

struct DeviationOptions {
  int steps = 100;
  double lr = 1e-3;
  /// Record every `eval_every` steps and after the last one; 0 records only step 0.
  int eval_every = 10;
  Eigen::Index batch_size = 64;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int bins = 32;

  void validate() const;
};

using GeneratorDivergence = std::function<double(const Eigen::VectorXd& theta_g)>;

/// θ_d frozen, θ_g descends V by Adam on search-pool minibatches.
DeviationTrace unilateral_deviation(const AdversarialGame& game, const Eigen::VectorXd& theta_d,
                                    const Eigen::VectorXd& theta_g, const GapData& data,
                                    const DeviationOptions& opts, Rng rng,
                                    const GeneratorDivergence& divergence = {});

/// Minibatches come from the training split; V and the histogram JSD are
/// measured on the evaluation split with a latent batch from rng.fork(1).
/// The histogram box is the evaluation data's extent widened by 1.
DeviationTrace unilateral_deviation(const GanState& state, const DataSplits& splits,
                                    const DeviationOptions& opts, const Rng& rng);

enum class Agent { generator, discriminator };

std::string agent_name(Agent agent);
Agent parse_agent(const std::string& name);

struct SpectrumOptions {
  int k = 5;
  int max_iters = 300;
  double eig_tol = 1e-6;
  /// Slack on the sign test for nash_consistent.
  double nash_tol = 1e-5;
  Eigen::Index batch_rows = 2048;

  void validate() const;
};

struct SpectrumReport {
  /// Sorted by decreasing magnitude.
  std::vector<double> eigenvalues;
  Agent agent = Agent::generator;
  /// Generator: every reported eigenvalue ≥ -tol. Discriminator: every one ≤ tol.
  bool nash_consistent = false;
  double tol = 0;
  int iterations = 0;
  bool converged = false;
};

/// HVP step used by the probes: 1e-4·(1 + |θ|).
double probe_hvp_step(const Eigen::VectorXd& params);

/// Leading eigenvalues of the Hessian of `loss` at `params`.
SpectrumReport spectrum_probe(const Loss& loss, const Eigen::VectorXd& params, Agent agent,
                              const SpectrumOptions& opts, Rng& rng);

/// Hessian of V with respect to one agent's parameters on a fixed batch of
/// opts.batch_rows rows resampled from the evaluation split.
SpectrumReport hessian_spectrum_probe(const GanState& state, const DataSplits& splits, Agent agent,
                                      const SpectrumOptions& opts, const Rng& rng);

}  // namespace proxgap
