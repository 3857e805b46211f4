#include "proxgap/config.hpp"

#include "proxgap/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace proxgap {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  if (!text.empty() && text.back() == ',') items.emplace_back();
  return items;
}

double parse_real(const std::string& key, const std::string& text) {
  double out = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  require(ec == std::errc() && ptr == end && std::isfinite(out),
          "config: '" + key + "' expects a real number, got '" + text + "'");
  return out;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long out = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  require(ec == std::errc() && ptr == end,
          "config: '" + key + "' expects an integer, got '" + text + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t out = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  require(ec == std::errc() && ptr == end,
          "config: '" + key + "' expects an unsigned integer, got '" + text + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  require(v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max(),
          "config: '" + key + "' is out of range");
  return static_cast<int>(v);
}

std::vector<Eigen::Index> parse_widths(const std::string& key, const std::string& text) {
  std::vector<Eigen::Index> widths;
  if (text.empty() || text == "none") return widths;
  for (const auto& item : split_commas(text)) {
    const long long w = parse_integer(key, item);
    require(w >= 1, "config: '" + key + "' widths must be positive");
    widths.push_back(static_cast<Eigen::Index>(w));
  }
  return widths;
}

std::string real_text(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string widths_text(const std::vector<Eigen::Index>& widths) {
  if (widths.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

Activation parse_activation(const std::string& text) {
  if (text == "tanh") return {ActivationKind::tanh, 0.2};
  if (text == "relu") return {ActivationKind::relu, 0.2};
  if (text == "leaky_relu") return {ActivationKind::leaky_relu, 0.2};
  throw PreconditionError("config: unknown activation '" + text + "'");
}

std::string activation_text(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
  }
  return "tanh";
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_u64(k, v); }},
      {"data.kind", [](auto& c, auto&, auto& v) { c.data.kind = v; }},
      {"data.modes", [](auto& c, auto& k, auto& v) { c.data.modes = parse_int(k, v); }},
      {"data.radius", [](auto& c, auto& k, auto& v) { c.data.radius = parse_real(k, v); }},
      {"data.sigma", [](auto& c, auto& k, auto& v) { c.data.sigma = parse_real(k, v); }},
      {"split.train", [](auto& c, auto& k, auto& v) { c.splits.train = parse_integer(k, v); }},
      {"split.search", [](auto& c, auto& k, auto& v) { c.splits.search = parse_integer(k, v); }},
      {"split.eval", [](auto& c, auto& k, auto& v) { c.splits.evaluation = parse_integer(k, v); }},
      {"latent.dim", [](auto& c, auto& k, auto& v) { c.latent_dim = parse_integer(k, v); }},
      {"net.d.hidden", [](auto& c, auto& k, auto& v) { c.d_hidden = parse_widths(k, v); }},
      {"net.g.hidden", [](auto& c, auto& k, auto& v) { c.g_hidden = parse_widths(k, v); }},
      {"net.activation", [](auto& c, auto&, auto& v) { c.activation = parse_activation(v); }},
      {"objective", [](auto& c, auto&, auto& v) { c.objective = v; }},
      {"objective.clip", [](auto& c, auto& k, auto& v) { c.clip = parse_real(k, v); }},
      {"train.steps", [](auto& c, auto& k, auto& v) { c.train.steps = parse_int(k, v); }},
      {"train.ratio", [](auto& c, auto& k, auto& v) { c.train.ratio = parse_int(k, v); }},
      {"train.batch", [](auto& c, auto& k, auto& v) { c.train.batch_size = parse_integer(k, v); }},
      {"train.lr_d", [](auto& c, auto& k, auto& v) { c.train.lr_d = parse_real(k, v); }},
      {"train.lr_g", [](auto& c, auto& k, auto& v) { c.train.lr_g = parse_real(k, v); }},
      {"train.beta1", [](auto& c, auto& k, auto& v) { c.train.beta1 = parse_real(k, v); }},
      {"train.beta2", [](auto& c, auto& k, auto& v) { c.train.beta2 = parse_real(k, v); }},
      {"train.checkpoint_every",
       [](auto& c, auto& k, auto& v) { c.train.checkpoint_every = parse_int(k, v); }},
      {"gap.lambda", [](auto& c, auto& k, auto& v) { c.gap.prox.lambda = parse_real(k, v); }},
      {"gap.prox_steps", [](auto& c, auto& k, auto& v) { c.gap.prox.prox_steps = parse_int(k, v); }},
      {"gap.prox_lr", [](auto& c, auto& k, auto& v) { c.gap.prox.prox_lr = parse_real(k, v); }},
      {"gap.worst_epochs", [](auto& c, auto& k, auto& v) { c.gap.worst_epochs = parse_real(k, v); }},
      {"gap.worst_iters",
       [](auto& c, auto& k, auto& v) { c.gap.worst_iters_override = parse_int(k, v); }},
      {"gap.worst_lr", [](auto& c, auto& k, auto& v) { c.gap.prox.worst_lr = parse_real(k, v); }},
      {"gap.beta1", [](auto& c, auto& k, auto& v) { c.gap.prox.adam_beta1 = parse_real(k, v); }},
      {"gap.beta2", [](auto& c, auto& k, auto& v) { c.gap.prox.adam_beta2 = parse_real(k, v); }},
      {"gap.sobolev_h", [](auto& c, auto& k, auto& v) { c.gap.prox.sobolev_h = parse_real(k, v); }},
      {"gap.batch", [](auto& c, auto& k, auto& v) { c.gap.prox.batch_size = parse_integer(k, v); }},
      {"metrics.bins", [](auto& c, auto& k, auto& v) { c.metrics.bins = parse_int(k, v); }},
      {"metrics.samples", [](auto& c, auto& k, auto& v) { c.metrics.samples = parse_integer(k, v); }},
      {"probe.steps", [](auto& c, auto& k, auto& v) { c.probe.steps = parse_int(k, v); }},
      {"probe.lr", [](auto& c, auto& k, auto& v) { c.probe.lr = parse_real(k, v); }},
      {"probe.eval_every", [](auto& c, auto& k, auto& v) { c.probe.eval_every = parse_int(k, v); }},
      {"probe.k", [](auto& c, auto& k, auto& v) { c.probe.k = parse_int(k, v); }},
      {"probe.agent", [](auto& c, auto&, auto& v) { c.probe.agent = v; }},
      {"probe.max_iters", [](auto& c, auto& k, auto& v) { c.probe.max_iters = parse_int(k, v); }},
      {"probe.batch_rows", [](auto& c, auto& k, auto& v) { c.probe.batch_rows = parse_integer(k, v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(data.kind == "gmm" || data.kind == "ring", "config: data.kind must be gmm or ring");
  require(data.modes >= 1, "config: data.modes must be positive");
  require(data.radius >= 0 && data.sigma > 0, "config: data.radius >= 0 and data.sigma > 0");
  require(splits.train >= 1 && splits.search >= 1 && splits.evaluation >= 1,
          "config: split sizes must be positive");
  require(latent_dim >= 1, "config: latent.dim must be positive");
  objective_kind();
  require(clip > 0, "config: objective.clip must be positive");
  require(train.steps >= 0, "config: train.steps must be nonnegative");
  require(train.ratio != 0, "config: train.ratio must be nonzero");
  require(train.batch_size >= 1, "config: train.batch must be positive");
  require(train.lr_d > 0 && train.lr_g > 0, "config: learning rates must be positive");
  require(train.beta1 >= 0 && train.beta1 < 1 && train.beta2 >= 0 && train.beta2 < 1,
          "config: Adam betas must lie in [0, 1)");
  require(train.checkpoint_every >= 0, "config: train.checkpoint_every must be nonnegative");
  if (train.checkpoint_every > 0 && train.steps > 0)
    require(train.steps % train.checkpoint_every == 0,
            "config: train.checkpoint_every must divide train.steps");
  require(gap.worst_epochs >= 0, "config: gap.worst_epochs must be nonnegative");
  require(gap.worst_iters_override >= 0, "config: gap.worst_iters must be nonnegative");
  proximal().validate();
  require(metrics.bins >= 1, "config: metrics.bins must be positive");
  require(metrics.samples >= 0, "config: metrics.samples must be nonnegative");
  require(probe.steps >= 0 && probe.eval_every >= 0 && probe.lr > 0,
          "config: probe.steps, probe.eval_every >= 0 and probe.lr > 0");
  require(probe.k >= 1 && probe.max_iters >= 1 && probe.batch_rows >= 1,
          "config: probe.k, probe.max_iters, probe.batch_rows must be positive");
  require(probe.agent == "generator" || probe.agent == "discriminator",
          "config: probe.agent must be generator or discriminator");
  d_spec().validate();
  g_spec().validate();
}

int ExperimentConfig::checkpoint_interval() const {
  if (train.checkpoint_every > 0) return train.checkpoint_every;
  if (train.steps == 0) return 1;
  // Largest divisor of steps not above 2% of steps.
  int target = std::max(1, static_cast<int>(std::lround(0.02 * train.steps)));
  while (train.steps % target != 0) --target;
  return target;
}

int ExperimentConfig::worst_iters() const {
  if (gap.worst_iters_override > 0) return gap.worst_iters_override;
  return epochs_to_iters(gap.worst_epochs, splits.search, gap.prox.batch_size);
}

ProximalConfig ExperimentConfig::proximal() const {
  ProximalConfig p = gap.prox;
  p.worst_iters = worst_iters();
  return p;
}

ObjectiveKind ExperimentConfig::objective_kind() const { return parse_objective(objective, clip); }

NetworkSpec ExperimentConfig::d_spec() const {
  NetworkSpec s;
  s.input_dim = 2;
  s.hidden_widths = d_hidden;
  s.output_dim = 1;
  s.activation = activation;
  s.head = std::holds_alternative<Classic>(objective_kind()) ? OutputHead::sigmoid
                                                             : OutputHead::linear;
  return s;
}

NetworkSpec ExperimentConfig::g_spec() const {
  NetworkSpec s;
  s.input_dim = latent_dim;
  s.hidden_widths = g_hidden;
  s.output_dim = 2;
  s.activation = activation;
  s.head = OutputHead::linear;
  return s;
}

SyntheticDist ExperimentConfig::distribution() const {
  if (data.kind == "ring") return SyntheticDist(Ring{data.modes, data.radius, data.sigma});
  GaussianMixture gm;
  gm.weights = Eigen::VectorXd::Constant(data.modes, 1.0 / data.modes);
  gm.means = Eigen::MatrixXd::Zero(data.modes, 2);
  if (data.modes > 1)
    gm.means.col(0) = Eigen::VectorXd::LinSpaced(data.modes, -data.radius, data.radius);
  gm.variances = Eigen::MatrixXd::Constant(data.modes, 2, data.sigma * data.sigma);
  return SyntheticDist(gm);
}

ExperimentConfig default_config(const std::string& objective) {
  ExperimentConfig c;
  c.objective = objective;
  if (std::holds_alternative<WassersteinClip>(parse_objective(objective, c.clip))) {
    c.train.lr_d = 4e-4;
    c.train.lr_g = 1e-4;
    c.train.beta1 = 0.5;
    c.train.beta2 = 0.999;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::string objective = "classic";
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "config: line " + std::to_string(line_no) + " is not 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    require(setters().count(key) == 1, "config: unknown key '" + key + "'");
    for (const auto& [k, v] : entries)
      require(k != key, "config: duplicate key '" + key + "'");
    if (key == "objective") objective = value;
    entries.emplace_back(std::move(key), std::move(value));
  }
  ExperimentConfig cfg = default_config(objective);
  for (const auto& [key, value] : entries) setters().at(key)(cfg, key, value);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& c) {
  return {
      {"seed", std::to_string(c.seed)},
      {"data.kind", c.data.kind},
      {"data.modes", std::to_string(c.data.modes)},
      {"data.radius", real_text(c.data.radius)},
      {"data.sigma", real_text(c.data.sigma)},
      {"split.train", std::to_string(c.splits.train)},
      {"split.search", std::to_string(c.splits.search)},
      {"split.eval", std::to_string(c.splits.evaluation)},
      {"latent.dim", std::to_string(c.latent_dim)},
      {"net.d.hidden", widths_text(c.d_hidden)},
      {"net.g.hidden", widths_text(c.g_hidden)},
      {"net.activation", activation_text(c.activation)},
      {"objective", c.objective},
      {"objective.clip", real_text(c.clip)},
      {"train.steps", std::to_string(c.train.steps)},
      {"train.ratio", std::to_string(c.train.ratio)},
      {"train.batch", std::to_string(c.train.batch_size)},
      {"train.lr_d", real_text(c.train.lr_d)},
      {"train.lr_g", real_text(c.train.lr_g)},
      {"train.beta1", real_text(c.train.beta1)},
      {"train.beta2", real_text(c.train.beta2)},
      {"train.checkpoint_every", std::to_string(c.train.checkpoint_every)},
      {"gap.lambda", real_text(c.gap.prox.lambda)},
      {"gap.prox_steps", std::to_string(c.gap.prox.prox_steps)},
      {"gap.prox_lr", real_text(c.gap.prox.prox_lr)},
      {"gap.worst_epochs", real_text(c.gap.worst_epochs)},
      {"gap.worst_iters", std::to_string(c.gap.worst_iters_override)},
      {"gap.worst_lr", real_text(c.gap.prox.worst_lr)},
      {"gap.beta1", real_text(c.gap.prox.adam_beta1)},
      {"gap.beta2", real_text(c.gap.prox.adam_beta2)},
      {"gap.sobolev_h", real_text(c.gap.prox.sobolev_h)},
      {"gap.batch", std::to_string(c.gap.prox.batch_size)},
      {"metrics.bins", std::to_string(c.metrics.bins)},
      {"metrics.samples", std::to_string(c.metrics.samples)},
      {"probe.steps", std::to_string(c.probe.steps)},
      {"probe.lr", real_text(c.probe.lr)},
      {"probe.eval_every", std::to_string(c.probe.eval_every)},
      {"probe.k", std::to_string(c.probe.k)},
      {"probe.agent", c.probe.agent},
      {"probe.max_iters", std::to_string(c.probe.max_iters)},
      {"probe.batch_rows", std::to_string(c.probe.batch_rows)},
  };
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split_commas(text)) {
    require(!item.empty(), "list: empty item in '" + text + "'");
    out.push_back(parse_real("list", item));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split_commas(text)) {
    require(!item.empty(), "list: empty item in '" + text + "'");
    out.push_back(parse_int("list", item));
  }
  return out;
}

DataSplits make_experiment_splits(const ExperimentConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(10);
  return make_splits(cfg.distribution(), cfg.splits.train, cfg.splits.search,
                     cfg.splits.evaluation, rng);
}

}  // namespace proxgap
