#include "proxgap/ad.hpp"

#include "proxgap/error.hpp"

#include <cmath>
#include <sstream>

namespace proxgap::ad {

const Eigen::MatrixXd& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const auto& v = value();
  require(v.rows() == 1 && v.cols() == 1, "Var::scalar: node is not 1x1");
  return v(0, 0);
}

Var Tape::push(Node node) {
  if (!node.value.allFinite()) {
    std::ostringstream os;
    os << "non-finite value at tape node #" << nodes_.size() << " (" << node.op
       << ")";
    throw NumericalError(os.str());
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Eigen::MatrixXd value) {
  Node n;
  n.value = std::move(value);
  n.op = "variable";
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Eigen::MatrixXd value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::record(Eigen::MatrixXd value, std::string_view op, std::span<const Var> parents,
                 Backward backward) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const auto& p : parents) n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Var& v, const Eigen::MatrixXd& g) {
  auto& node = nodes_[v.id()];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0)
    node.grad = g;
  else
    node.grad += g;
}

void Tape::backward(const Var& root) {
  require(root.rows() == 1 && root.cols() == 1, "Tape::backward: root must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id()].grad = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
    // Parents have smaller ids, so n.grad is not written while it is read.
    n.backward(*this, n.grad);
  }
}

Eigen::MatrixXd Tape::grad(const Var& v) const {
  const auto& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs "
       << b.rows() << "x" << b.cols();
    throw PreconditionError(os.str());
  }
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), "add", {a, b},
                         [a, b](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

Var operator-(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), "sub", {a, b},
                         [a, b](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, -g);
                         });
}

Var operator-(const Var& a) { return -1.0 * a; }

Var operator*(double s, const Var& a) {
  return a.tape().record(s * a.value(), "scale", {a},
                         [a, s](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, s * g); });
}

Var operator*(const Var& a, double s) { return s * a; }

Var add_scalar(const Var& a, double s) {
  return a.tape().record(a.value().array() + s, "add_scalar", {a},
                         [a](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, g); });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matmul: inner dimensions " << a.cols() << " and " << b.rows();
    throw PreconditionError(os.str());
  }
  return a.tape().record(a.value() * b.value(), "matmul", {a, b},
                         [a, b](Tape& t, const Eigen::MatrixXd& g) {
                           if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
                           if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
                         });
}

Var add_row(const Var& a, const Var& b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Eigen::MatrixXd out = a.value().rowwise() + b.value().row(0);
  return a.tape().record(std::move(out), "add_row", {a, b},
                         [a, b](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, g);
                           if (t.needs_grad(b)) t.accumulate(b, g.colwise().sum());
                         });
}

Var cwise_product(const Var& a, const Var& b) {
  same_shape(a, b, "cwise_product");
  return a.tape().record(a.value().cwiseProduct(b.value()), "cwise_product", {a, b},
                         [a, b](Tape& t, const Eigen::MatrixXd& g) {
                           if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                           if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                         });
}

Var reshape_segment(const Var& v, Eigen::Index offset, Eigen::Index rows,
                    Eigen::Index cols) {
  require(v.cols() == 1, "reshape_segment: source must be a column vector");
  require(offset >= 0 && offset + rows * cols <= v.rows(),
          "reshape_segment: segment out of range");
  Eigen::MatrixXd out =
      Eigen::Map<const Eigen::MatrixXd>(v.value().data() + offset, rows, cols);
  const Eigen::Index total = v.rows();
  return v.tape().record(std::move(out), "reshape_segment", {v},
                         [v, offset, total](Tape& t, const Eigen::MatrixXd& g) {
                           Eigen::MatrixXd full = Eigen::MatrixXd::Zero(total, 1);
                           full.middleRows(offset, g.size()) =
                               Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
                           t.accumulate(v, full);
                         });
}

Var row_block(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "row_block: out of range");
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return a.tape().record(a.value().middleRows(start, count), "row_block", {a},
                         [a, start, rows, cols](Tape& t, const Eigen::MatrixXd& g) {
                           Eigen::MatrixXd full = Eigen::MatrixXd::Zero(rows, cols);
                           full.middleRows(start, g.rows()) = g;
                           t.accumulate(a, full);
                         });
}

Var concat_cols(const std::vector<Var>& blocks) {
  require(!blocks.empty(), "concat_cols: no blocks");
  const Eigen::Index rows = blocks.front().rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    require(b.rows() == rows, "concat_cols: blocks differ in height");
    cols += b.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b.value();
    c += b.cols();
  }
  return blocks.front().tape().record(
      std::move(out), "concat_cols", blocks, [blocks](Tape& t, const Eigen::MatrixXd& g) {
        Eigen::Index c = 0;
        for (const auto& b : blocks) {
          t.accumulate(b, g.middleCols(c, b.cols()));
          c += b.cols();
        }
      });
}

Var tanh(const Var& a) {
  Eigen::MatrixXd y = a.value().array().tanh();
  return a.tape().record(y, "tanh", {a}, [a, y](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
  const Eigen::ArrayXXd x = a.value().array();
  Eigen::MatrixXd y = (x > 0.0).select(x, slope * x);
  return a.tape().record(std::move(y), slope == 0.0 ? "relu" : "leaky_relu", {a},
                         [a, slope](Tape& t, const Eigen::MatrixXd& g) {
                           const auto x = a.value().array();
                           t.accumulate(a, (x > 0.0).select(g.array(), slope * g.array()).matrix());
                         });
}

Var sigmoid(const Var& a) {
  Eigen::MatrixXd y = (1.0 + (-a.value().array()).exp()).inverse();
  return a.tape().record(y, "sigmoid", {a}, [a, y](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var log(const Var& a) {
  return a.tape().record(a.value().array().log(), "log", {a},
                         [a](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, (g.array() / a.value().array()).matrix());
                         });
}

Var exp(const Var& a) {
  Eigen::MatrixXd y = a.value().array().exp();
  return a.tape().record(y, "exp", {a}, [a, y](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g.cwiseProduct(y));
  });
}

Var square(const Var& a) {
  return a.tape().record(a.value().array().square(), "square", {a},
                         [a](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, (2.0 * g.array() * a.value().array()).matrix());
                         });
}

Var clamp(const Var& a, double lo, double hi) {
  require(lo <= hi, "clamp: empty interval");
  return a.tape().record(a.value().cwiseMax(lo).cwiseMin(hi), "clamp", {a},
                         [a, lo, hi](Tape& t, const Eigen::MatrixXd& g) {
                           const auto x = a.value().array();
                           t.accumulate(a, ((x >= lo) && (x <= hi)).select(g.array(), 0.0).matrix());
                         });
}

Var unary(const Var& a, std::function<double(double)> f,
          std::function<double(double)> df, std::string_view op) {
  Eigen::MatrixXd y = a.value().unaryExpr(f);
  return a.tape().record(std::move(y), op, {a},
                         [a, df = std::move(df)](Tape& t, const Eigen::MatrixXd& g) {
                           t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(df)));
                         });
}

Var sum(const Var& a) {
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = a.value().sum();
  return a.tape().record(std::move(s), "sum", {a}, [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, Eigen::MatrixXd::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean: empty node");
  return (1.0 / static_cast<double>(a.value().size())) * sum(a);
}

}  // namespace proxgap::ad
