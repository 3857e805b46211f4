#include "proxgap/network.hpp"

#include <sstream>

namespace proxgap {

void NetworkSpec::validate() const {
  require(input_dim > 0, "NetworkSpec: input_dim must be positive");
  require(output_dim > 0, "NetworkSpec: output_dim must be positive");
  for (auto w : hidden_widths) require(w > 0, "NetworkSpec: hidden widths must be positive");
  if (activation.kind == ActivationKind::leaky_relu)
    require(std::isfinite(activation.slope), "NetworkSpec: leaky_relu slope must be finite");
}

std::vector<LayerShape> NetworkSpec::layers() const {
  std::vector<LayerShape> out;
  Eigen::Index prev = input_dim;
  for (auto w : hidden_widths) {
    out.push_back({prev, w});
    prev = w;
  }
  out.push_back({prev, output_dim});
  return out;
}

Eigen::Index NetworkSpec::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers()) n += l.fan_in * l.fan_out + l.fan_out;
  return n;
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  os << input_dim;
  for (auto w : hidden_widths) os << '-' << w;
  os << '-' << output_dim << ' ';
  switch (activation.kind) {
    case ActivationKind::tanh: os << "tanh"; break;
    case ActivationKind::relu: os << "relu"; break;
    case ActivationKind::leaky_relu: os << "leaky_relu(" << activation.slope << ")"; break;
  }
  os << ' ' << (head == OutputHead::sigmoid ? "sigmoid" : "linear");
  return os.str();
}

std::vector<Segment> parameter_layout(const NetworkSpec& spec) {
  std::vector<Segment> out;
  Eigen::Index offset = 0;
  const auto layers = spec.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto n_w = layers[l].fan_in * layers[l].fan_out;
    out.push_back({"W" + std::to_string(l), offset, n_w});
    offset += n_w;
    out.push_back({"b" + std::to_string(l), offset, layers[l].fan_out});
    offset += layers[l].fan_out;
  }
  return out;
}

ParamVector::ParamVector(const NetworkSpec& spec, Eigen::VectorXd values)
    : values_(std::move(values)), layout_(parameter_layout(spec)) {
  spec.validate();
  require(values_.size() == spec.parameter_count(),
          "ParamVector: length " + std::to_string(values_.size()) + " does not match " +
              std::to_string(spec.parameter_count()) + " for " + spec.describe());
  if (!values_.allFinite()) throw NumericalError("ParamVector: non-finite parameter value");
}

const Segment& ParamVector::segment(std::string_view name) const {
  for (const auto& s : layout_)
    if (s.name == name) return s;
  throw PreconditionError("ParamVector: no segment named " + std::string(name));
}

Eigen::Ref<const Eigen::VectorXd> ParamVector::segment_values(std::string_view name) const {
  const auto& s = segment(name);
  return values_.segment(s.offset, s.length);
}

ParamVector ParamVector::with_values(Eigen::VectorXd values) const {
  require(values.size() == values_.size(), "ParamVector::with_values: length mismatch");
  if (!values.allFinite()) throw NumericalError("ParamVector: non-finite parameter value");
  ParamVector out;
  out.values_ = std::move(values);
  out.layout_ = layout_;
  return out;
}

ParamVector init_network(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  Eigen::VectorXd values = Eigen::VectorXd::Zero(spec.parameter_count());
  Eigen::Index offset = 0;
  for (const auto& l : spec.layers()) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
    for (Eigen::Index i = 0; i < l.fan_in * l.fan_out; ++i) values[offset + i] = rng.uniform(-a, a);
    offset += l.fan_in * l.fan_out + l.fan_out;
  }
  return ParamVector(spec, std::move(values));
}

ad::Var forward(const NetworkSpec& spec, const ad::Var& theta, const ad::Var& batch) {
  require(theta.cols() == 1 && theta.rows() == spec.parameter_count(),
          "forward: parameter count mismatch");
  require(batch.cols() == spec.input_dim, "forward: batch width does not match input_dim");
  const auto layers = spec.layers();
  ad::Var h = batch;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto [fan_in, fan_out] = layers[l];
    const auto w = ad::reshape_segment(theta, offset, fan_in, fan_out);
    offset += fan_in * fan_out;
    const auto b = ad::reshape_segment(theta, offset, 1, fan_out);
    offset += fan_out;
    h = ad::add_row(ad::matmul(h, w), b);
    if (l + 1 < layers.size()) {
      switch (spec.activation.kind) {
        case ActivationKind::tanh: h = ad::tanh(h); break;
        case ActivationKind::relu: h = ad::relu(h); break;
        case ActivationKind::leaky_relu: h = ad::leaky_relu(h, spec.activation.slope); break;
      }
    }
  }
  if (spec.head == OutputHead::sigmoid) h = ad::sigmoid(h);
  return h;
}

}  // namespace proxgap
