#pragma once

#include "proxgap/ad.hpp"
#include "proxgap/error.hpp"
#include "proxgap/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace proxgap {

enum class ActivationKind { tanh, relu, leaky_relu };
enum class OutputHead { linear, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::tanh;
  double slope = 0.2;  // leaky_relu only
};

struct LayerShape {
  Eigen::Index fan_in;
  Eigen::Index fan_out;
};

/// Fully connected feed-forward architecture. Hidden layers share one
/// activation; the last layer is followed by the output head.
struct NetworkSpec {
  Eigen::Index input_dim = 1;
  std::vector<Eigen::Index> hidden_widths;
  Eigen::Index output_dim = 1;
  Activation activation;
  OutputHead head = OutputHead::linear;

  void validate() const;
  std::vector<LayerShape> layers() const;
  Eigen::Index parameter_count() const;
  /// e.g. "2-16-16-1 tanh sigmoid".
  std::string describe() const;
};

struct Segment {
  std::string name;
  Eigen::Index offset;
  Eigen::Index length;
};

/// Flat parameter store. Layer l occupies segment "W<l>" (fan_in x fan_out,
/// column-major) followed by "b<l>" (fan_out).
class ParamVector {
public:
  ParamVector() = default;
  ParamVector(const NetworkSpec& spec, Eigen::VectorXd values);

  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<Segment>& layout() const { return layout_; }
  Eigen::Index size() const { return values_.size(); }
  const Segment& segment(std::string_view name) const;
  Eigen::Ref<const Eigen::VectorXd> segment_values(std::string_view name) const;

  /// Same layout, new values (validated).
  ParamVector with_values(Eigen::VectorXd values) const;

private:
  Eigen::VectorXd values_;
  std::vector<Segment> layout_;
};

std::vector<Segment> parameter_layout(const NetworkSpec& spec);

/// Glorot-uniform weights, U(-a, a) with a = sqrt(6 / (fan_in + fan_out));
/// zero biases.
ParamVector init_network(const NetworkSpec& spec, Rng& rng);

namespace detail {

template <class Derived>
void apply_activation(Eigen::MatrixBase<Derived>& z, const Activation& act) {
  using Scalar = typename Derived::Scalar;
  switch (act.kind) {
    case ActivationKind::tanh:
      z = z.array().tanh().matrix();
      break;
    case ActivationKind::relu:
      z = z.cwiseMax(Scalar(0));
      break;
    case ActivationKind::leaky_relu:
      z = (z.array() > Scalar(0)).select(z.array(), Scalar(act.slope) * z.array()).matrix();
      break;
  }
}

}  // namespace detail

/// Plain evaluation: batch is n x input_dim, result n x output_dim.
template <class DerivedP, class DerivedX>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> forward(
    const NetworkSpec& spec, const Eigen::MatrixBase<DerivedP>& params,
    const Eigen::MatrixBase<DerivedX>& batch) {
  using Scalar = typename DerivedX::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(params.size() == spec.parameter_count(), "forward: parameter count mismatch");
  require(batch.cols() == spec.input_dim, "forward: batch width does not match input_dim");

  const auto layers = spec.layers();
  Mat h = batch;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto [fan_in, fan_out] = layers[l];
    const auto w = params.derived().segment(offset, fan_in * fan_out).reshaped(fan_in, fan_out);
    offset += fan_in * fan_out;
    const auto b = params.derived().segment(offset, fan_out);
    offset += fan_out;
    Mat z = (h * w.template cast<Scalar>()).rowwise() + b.transpose().template cast<Scalar>();
    if (l + 1 < layers.size()) detail::apply_activation(z, spec.activation);
    h = std::move(z);
  }
  if (spec.head == OutputHead::sigmoid)
    h = (Scalar(1) + (-h.array()).exp()).inverse().matrix();
  return h;
}

inline Eigen::MatrixXd forward(const NetworkSpec& spec, const ParamVector& params,
                               const Eigen::MatrixXd& batch) {
  return forward(spec, params.values(), batch);
}

/// Same network recorded on a tape; `theta` is a parameter column vector.
ad::Var forward(const NetworkSpec& spec, const ad::Var& theta, const ad::Var& batch);

}  // namespace proxgap
