#include "proxgap/calculus.hpp"

#include "proxgap/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace proxgap {

double evaluate(const Loss& loss, const Eigen::VectorXd& params) {
  ad::Tape tape;
  const auto theta = tape.constant(params);
  return loss(tape, theta).scalar();
}

ValueAndGrad value_and_grad(const Loss& loss, const Eigen::VectorXd& params) {
  ad::Tape tape;
  const auto theta = tape.variable(params);
  const auto out = loss(tape, theta);
  tape.backward(out);
  return {out.scalar(), tape.grad(theta).col(0)};
}

Eigen::VectorXd grad_params(const Loss& loss, const Eigen::VectorXd& params) {
  return value_and_grad(loss, params).grad;
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& params, double h) {
  require(h > 0, "finite_diff_grad: step must be positive");
  Eigen::VectorXd g(params.size());
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + h;
    const double up = f(probe);
    probe[i] = params[i] - h;
    const double down = f(probe);
    probe[i] = params[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd finite_diff_grad(const Loss& loss, const Eigen::VectorXd& params, double h) {
  return finite_diff_grad([&](const Eigen::VectorXd& p) { return evaluate(loss, p); }, params, h);
}

Eigen::VectorXd input_grad(const NetworkSpec& spec, const Eigen::VectorXd& params,
                           const Eigen::VectorXd& x, double h) {
  require(h > 0, "input_grad: step must be positive");
  require(x.size() == spec.input_dim, "input_grad: point dimension mismatch");
  const Eigen::Index d = spec.input_dim;
  Eigen::MatrixXd shifted(2 * d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    shifted.row(2 * j) = x.transpose();
    shifted.row(2 * j + 1) = x.transpose();
    shifted(2 * j, j) += h;
    shifted(2 * j + 1, j) -= h;
  }
  const Eigen::MatrixXd out = forward(spec, params, shifted);
  Eigen::VectorXd g(d);
  for (Eigen::Index j = 0; j < d; ++j) g[j] = (out(2 * j, 0) - out(2 * j + 1, 0)) / (2.0 * h);
  return g;
}

ad::Var input_grad(const NetworkSpec& spec, const ad::Var& theta, const Eigen::MatrixXd& batch,
                   double h) {
  require(h > 0, "input_grad: step must be positive");
  require(spec.output_dim == 1, "input_grad: network must have scalar output");
  const Eigen::Index n = batch.rows();
  const Eigen::Index d = spec.input_dim;
  require(batch.cols() == d, "input_grad: batch width mismatch");
  // Blocks [x + h e_0; x - h e_0; x + h e_1; ...], one forward pass.
  Eigen::MatrixXd shifted(2 * d * n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    shifted.middleRows(2 * j * n, n) = batch;
    shifted.middleRows((2 * j + 1) * n, n) = batch;
    shifted.col(j).segment(2 * j * n, n).array() += h;
    shifted.col(j).segment((2 * j + 1) * n, n).array() -= h;
  }
  ad::Tape& tape = theta.tape();
  const auto out = forward(spec, theta, tape.constant(std::move(shifted)));
  std::vector<ad::Var> columns;
  columns.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    columns.push_back((1.0 / (2.0 * h)) *
                      (ad::row_block(out, 2 * j * n, n) - ad::row_block(out, (2 * j + 1) * n, n)));
  }
  return ad::concat_cols(columns);
}

Eigen::VectorXd hvp(const Loss& loss, const Eigen::VectorXd& params, const Eigen::VectorXd& v,
                    double h) {
  require(h > 0, "hvp: step must be positive");
  require(v.size() == params.size(), "hvp: direction length mismatch");
  const double norm = v.norm();
  require(norm > 1e-10, "hvp: direction norm must exceed 1e-10");
  const Eigen::VectorXd u = v / norm;
  const Eigen::VectorXd up = grad_params(loss, params + h * u);
  const Eigen::VectorXd down = grad_params(loss, params - h * u);
  return norm * (up - down) / (2.0 * h);
}

namespace {

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

// Removes components along locked vectors.
void deflate(Eigen::MatrixXd& block, const Eigen::MatrixXd& locked) {
  if (locked.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) block -= locked * (locked.transpose() * block);
}

}  // namespace

EigenEstimate top_k_eigenvalues(const LinearOperator& op, Eigen::Index dim, int k,
                                int max_iters, double tol, Rng& rng) {
  require(dim >= 1, "top_k_eigenvalues: dimension must be positive");
  require(k >= 1 && k <= dim, "top_k_eigenvalues: need 1 <= k <= dim");
  require(max_iters >= 1, "top_k_eigenvalues: max_iters must be positive");
  require(tol > 0, "top_k_eigenvalues: tolerance must be positive");

  EigenEstimate result;
  Eigen::MatrixXd locked(dim, 0);
  std::vector<double> locked_values;

  // Two guard vectors speed up separation of the k-th value.
  auto block_width = [&](Eigen::Index remaining) {
    return std::min<Eigen::Index>(dim - locked.cols(), remaining + 2);
  };

  Eigen::MatrixXd q = rng.normal_matrix(dim, block_width(k));
  deflate(q, locked);
  q = orthonormal_columns(q);

  int zero_streak = 0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    result.iterations = iter;
    const Eigen::Index p = q.cols();
    Eigen::MatrixXd z(dim, p);
    for (Eigen::Index j = 0; j < p; ++j) z.col(j) = op(q.col(j));
    deflate(z, locked);

    if (z.norm() <= 1e-300) {
      // The remaining subspace is annihilated: every remaining value is 0.
      if (++zero_streak >= 3) {
        result.breakdown = true;
        break;
      }
      q = orthonormal_columns(rng.normal_matrix(dim, p));
      deflate(q, locked);
      q = orthonormal_columns(q);
      continue;
    }
    zero_streak = 0;

    Eigen::MatrixXd t = q.transpose() * z;
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    const Eigen::VectorXd theta = small.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return std::abs(theta[a]) > std::abs(theta[b]);
    });

    const Eigen::MatrixXd ritz = q * small.eigenvectors();
    const Eigen::MatrixXd images = z * small.eigenvectors();
    const double scale = std::max(std::abs(theta[order[0]]),
                                  locked_values.empty() ? 0.0 : std::abs(locked_values.front()));

    // Lock the leading run of converged Ritz pairs.
    const auto wanted = static_cast<std::size_t>(k) - locked_values.size();
    std::size_t newly_locked = 0;
    for (std::size_t i = 0; i < wanted && i < order.size(); ++i) {
      const auto c = order[i];
      const double residual = (images.col(c) - theta[c] * ritz.col(c)).norm();
      if (residual > tol * std::max(scale, 1e-300)) break;
      locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
      locked.col(locked.cols() - 1) = ritz.col(c);
      locked_values.push_back(theta[c]);
      ++newly_locked;
    }
    if (locked_values.size() == static_cast<std::size_t>(k)) {
      result.converged = true;
      break;
    }

    // Power step on the Ritz basis, re-sized to the remaining demand.
    const Eigen::Index width = block_width(k - static_cast<Eigen::Index>(locked_values.size()));
    Eigen::MatrixXd next(dim, width);
    for (Eigen::Index j = 0; j < width; ++j) {
      const auto src = static_cast<std::size_t>(j) + newly_locked;
      next.col(j) = src < order.size() ? Eigen::VectorXd(images.col(order[src]))
                                       : rng.normal_matrix(dim, 1).col(0);
    }
    deflate(next, locked);
    q = orthonormal_columns(next);

    if (iter == max_iters) {
      // Report the best current estimates for whatever did not lock.
      for (std::size_t i = newly_locked; locked_values.size() < static_cast<std::size_t>(k) &&
                                         i < order.size();
           ++i) {
        locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
        locked.col(locked.cols() - 1) = ritz.col(order[i]);
        locked_values.push_back(theta[order[i]]);
      }
    }
  }

  while (locked_values.size() < static_cast<std::size_t>(k)) {
    locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
    locked.col(locked.cols() - 1).setZero();
    locked_values.push_back(0.0);
  }

  std::vector<std::size_t> idx(locked_values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return std::abs(locked_values[a]) > std::abs(locked_values[b]);
  });
  for (auto i : idx) {
    result.values.push_back(locked_values[i]);
    result.vectors.push_back(locked.col(static_cast<Eigen::Index>(i)));
  }
  return result;
}

}  // namespace proxgap
