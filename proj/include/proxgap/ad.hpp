#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

/// Reverse-mode automatic differentiation over dense matrices.
///
/// A Tape records every intermediate as a node holding its value; a Var is a
/// handle to one node. Nodes reachable only from constants carry no gradient
/// and are skipped by backward(). Every node value is checked for finiteness
/// on creation; a violation raises NumericalError naming the node index and
/// operation.
namespace proxgap::ad {

class Tape;

class Var {
public:
  Var() = default;

  const Eigen::MatrixXd& value() const;
  /// Value of a 1x1 node.
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
public:
  using Backward = std::function<void(Tape&, const Eigen::MatrixXd& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Eigen::MatrixXd value);
  Var constant(Eigen::MatrixXd value);

  /// Records a derived node. `parents` decide whether the node needs a
  /// gradient; `backward` receives d(root)/d(node) and must accumulate into
  /// the parents.
  Var record(Eigen::MatrixXd value, std::string_view op, std::span<const Var> parents,
             Backward backward);
  Var record(Eigen::MatrixXd value, std::string_view op,
             std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), op, std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  /// Seeds d(root)/d(root) = 1 and propagates. `root` must be 1x1.
  void backward(const Var& root);

  /// Gradient of the last backward() root w.r.t. `v`; zeros if unreached.
  Eigen::MatrixXd grad(const Var& v) const;

  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  void accumulate(const Var& v, const Eigen::MatrixXd& g);
  const Eigen::MatrixXd& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::string_view op;
    Backward backward;
    bool needs_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double s, const Var& a);
Var operator*(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var matmul(const Var& a, const Var& b);
/// a (n x m) plus row vector b (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& b);
Var cwise_product(const Var& a, const Var& b);

/// Column-major reshape of entries [offset, offset + rows*cols) of a vector.
Var reshape_segment(const Var& v, Eigen::Index offset, Eigen::Index rows,
                    Eigen::Index cols);
Var row_block(const Var& a, Eigen::Index start, Eigen::Index count);
/// Horizontal concatenation of equally tall blocks.
Var concat_cols(const std::vector<Var>& blocks);

Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
/// Clamp into [lo, hi]; gradient passes only where the input lies inside.
Var clamp(const Var& a, double lo, double hi);

/// Elementwise map with a caller-supplied derivative.
Var unary(const Var& a, std::function<double(double)> f,
          std::function<double(double)> df, std::string_view op);

Var sum(const Var& a);
Var mean(const Var& a);

}  // namespace proxgap::ad
