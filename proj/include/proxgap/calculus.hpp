#pragma once

#include "proxgap/ad.hpp"
#include "proxgap/network.hpp"
#include "proxgap/rng.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace proxgap {

/// A scalar loss recorded on a tape as a function of one parameter vector.
/// Anything else the loss depends on is captured as a constant.
using Loss = std::function<ad::Var(ad::Tape&, const ad::Var& theta)>;

double evaluate(const Loss& loss, const Eigen::VectorXd& params);

struct ValueAndGrad {
  double value;
  Eigen::VectorXd grad;
};

ValueAndGrad value_and_grad(const Loss& loss, const Eigen::VectorXd& params);

/// Exact reverse-mode gradient.
Eigen::VectorXd grad_params(const Loss& loss, const Eigen::VectorXd& params);

/// Central differences (f(θ + h e_i) - f(θ - h e_i)) / 2h.
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& params, double h);
Eigen::VectorXd finite_diff_grad(const Loss& loss, const Eigen::VectorXd& params, double h);

/// ∇_x D(x) by central differences over the input coordinates.
Eigen::VectorXd input_grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x, double h);

/// Batched ∇_x D on a tape: row i holds the input gradient at batch row i.
/// Built from forward evaluations only, so it stays differentiable in theta.
ad::Var input_grad(const NetworkSpec& spec, const ad::Var& theta, const Eigen::MatrixXd& batch,
                   double h);

/// Hessian-vector product by central differences of the exact gradient along
/// the unit direction of v, rescaled by |v|.
Eigen::VectorXd hvp(const Loss& loss, const Eigen::VectorXd& params, const Eigen::VectorXd& v,
                    double h);

struct EigenEstimate {
  /// Sorted by decreasing magnitude.
  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Leading-magnitude eigenvalues of a symmetric operator known only through
/// products. Block power iteration with Rayleigh-Ritz extraction on the
/// symmetrized projected operator; converged Ritz pairs are deflated (locked)
/// and later blocks are kept orthogonal to them.
EigenEstimate top_k_eigenvalues(const LinearOperator& op, Eigen::Index dim, int k,
                                int max_iters, double tol, Rng& rng);

}  // namespace proxgap
