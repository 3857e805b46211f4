#include "proxgap/objectives.hpp"

#include "proxgap/error.hpp"
#include "proxgap/optim.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace proxgap {

namespace {

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_clip_box(const GanState& state) {
  if (const auto* w = std::get_if<WassersteinClip>(&state.objective)) {
    if (state.theta_d.values().cwiseAbs().maxCoeff() > w->clip * (1.0 + 1e-12))
      throw PreconditionError("WassersteinClip: discriminator parameters outside [-c, c]");
  }
}

}  // namespace

FGanFamily make_fgan_family(FGanKind kind) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double ln2 = std::numbers::ln2;
  FGanFamily fam{kind, "", {}, {}, {}, {}, {}, {}, inf};
  switch (kind) {
    case FGanKind::kl:
      fam.name = "kl";
      fam.f = [](double t) { return t * std::log(t); };
      fam.f_prime = [](double t) { return std::log(t) + 1.0; };
      fam.f_star = [](double x) { return std::exp(x - 1.0); };
      fam.f_star_prime = [](double x) { return std::exp(x - 1.0); };
      fam.output_map = [](double v) { return v; };
      fam.output_map_prime = [](double) { return 1.0; };
      break;
    case FGanKind::reverse_kl:
      fam.name = "reverse-kl";
      fam.f = [](double t) { return -std::log(t); };
      fam.f_prime = [](double t) { return -1.0 / t; };
      fam.f_star = [](double x) { return -1.0 - std::log(-x); };
      fam.f_star_prime = [](double x) { return -1.0 / x; };
      fam.output_map = [](double v) { return -std::exp(v); };
      fam.output_map_prime = [](double v) { return -std::exp(v); };
      fam.f_star_upper = 0.0;
      break;
    case FGanKind::pearson_chi2:
      fam.name = "pearson";
      fam.f = [](double t) { return (t - 1.0) * (t - 1.0); };
      fam.f_prime = [](double t) { return 2.0 * (t - 1.0); };
      fam.f_star = [](double x) { return 0.25 * x * x + x; };
      fam.f_star_prime = [](double x) { return 0.5 * x + 1.0; };
      fam.output_map = [](double v) { return v; };
      fam.output_map_prime = [](double) { return 1.0; };
      break;
    case FGanKind::jensen_shannon_scaled:
      // f(t) = t log t - (t + 1) log((t + 1) / 2): the classic game as an f-GAN.
      fam.name = "js";
      fam.f = [](double t) { return t * std::log(t) - (t + 1.0) * std::log((t + 1.0) / 2.0); };
      fam.f_prime = [](double t) { return std::log(2.0 * t / (t + 1.0)); };
      fam.f_star = [](double x) { return -std::log(2.0 - std::exp(x)); };
      fam.f_star_prime = [](double x) { return std::exp(x) / (2.0 - std::exp(x)); };
      fam.output_map = [ln2](double v) { return ln2 - softplus(-v); };
      fam.output_map_prime = [](double v) { return logistic(-v); };
      fam.f_star_upper = ln2;
      break;
  }
  return fam;
}

const std::vector<FGanKind>& all_fgan_kinds() {
  static const std::vector<FGanKind> kinds = {FGanKind::kl, FGanKind::reverse_kl,
                                              FGanKind::pearson_chi2,
                                              FGanKind::jensen_shannon_scaled};
  return kinds;
}

ObjectiveKind parse_objective(const std::string& name, double clip) {
  if (name == "classic") return Classic{};
  if (name == "wgan") {
    require(clip > 0, "wgan: clip must be positive");
    return WassersteinClip{clip};
  }
  for (auto k : all_fgan_kinds())
    if (name == "fgan-" + make_fgan_family(k).name) return FGan{k};
  throw PreconditionError("unknown objective '" + name + "'");
}

std::string objective_name(const ObjectiveKind& kind) {
  if (std::holds_alternative<Classic>(kind)) return "classic";
  if (std::holds_alternative<WassersteinClip>(kind)) return "wgan";
  return "fgan-" + make_fgan_family(std::get<FGan>(kind).family).name;
}

void GanState::validate() const {
  d_spec.validate();
  g_spec.validate();
  require(d_spec.output_dim == 1, "GanState: discriminator must have scalar output");
  require(g_spec.output_dim == d_spec.input_dim,
          "GanState: generator output dimension must equal the data dimension");
  require(theta_d.size() == d_spec.parameter_count(), "GanState: theta_d length mismatch");
  require(theta_g.size() == g_spec.parameter_count(), "GanState: theta_g length mismatch");
  const bool classic = std::holds_alternative<Classic>(objective);
  require(classic == (d_spec.head == OutputHead::sigmoid),
          "GanState: classic objective needs a sigmoid head; other objectives a linear head");
  if (const auto* w = std::get_if<WassersteinClip>(&objective))
    require(w->clip > 0, "GanState: clip must be positive");
}

ad::Var objective_value(const ObjectiveKind& kind, const NetworkSpec& d_spec,
                        const ad::Var& theta_d, const NetworkSpec& g_spec,
                        const ad::Var& theta_g, const Batch& batch) {
  require(batch.real.rows() > 0 && batch.latent.rows() > 0, "objective: empty batch");
  ad::Tape& tape = theta_d.tape();
  const auto real_out = forward(d_spec, theta_d, tape.constant(batch.real));
  const auto fake = forward(g_spec, theta_g, tape.constant(batch.latent));
  const auto fake_out = forward(d_spec, theta_d, fake);

  return std::visit(
      [&](const auto& obj) -> ad::Var {
        using T = std::decay_t<decltype(obj)>;
        if constexpr (std::is_same_v<T, Classic>) {
          constexpr double eps = kClassicClampEps;
          const auto d_real = ad::clamp(real_out, eps, 1.0 - eps);
          const auto d_fake = ad::clamp(fake_out, eps, 1.0 - eps);
          return ad::mean(ad::log(d_real)) + ad::mean(ad::log(ad::add_scalar(-d_fake, 1.0)));
        } else if constexpr (std::is_same_v<T, WassersteinClip>) {
          return ad::mean(real_out) - ad::mean(fake_out);
        } else {
          const auto fam = make_fgan_family(obj.family);
          const auto t_real = ad::unary(real_out, fam.output_map, fam.output_map_prime, "output_map");
          const auto t_fake = ad::unary(fake_out, fam.output_map, fam.output_map_prime, "output_map");
          const auto conj = ad::unary(t_fake, fam.f_star, fam.f_star_prime, "f_star");
          return ad::mean(t_real) - ad::mean(conj);
        }
      },
      kind);
}

double eval_objective(const GanState& state, const Eigen::MatrixXd& real,
                      const Eigen::MatrixXd& latent) {
  check_clip_box(state);
  ad::Tape tape;
  return objective_value(state.objective, state.d_spec, tape.constant(state.theta_d.values()),
                         state.g_spec, tape.constant(state.theta_g.values()), {real, latent})
      .scalar();
}

double discriminator_ascent_loss(const GanState& state, const Batch& batch) {
  return -eval_objective(state, batch.real, batch.latent);
}

double generator_descent_loss(const GanState& state, const Batch& batch) {
  return eval_objective(state, batch.real, batch.latent);
}

Loss discriminator_loss_fn(const GanState& state, Batch batch) {
  check_clip_box(state);
  return [state, batch = std::move(batch)](ad::Tape& tape, const ad::Var& theta_d) {
    return -objective_value(state.objective, state.d_spec, theta_d, state.g_spec,
                            tape.constant(state.theta_g.values()), batch);
  };
}

Loss generator_loss_fn(const GanState& state, Batch batch) {
  check_clip_box(state);
  return [state, batch = std::move(batch)](ad::Tape& tape, const ad::Var& theta_g) {
    return objective_value(state.objective, state.d_spec, tape.constant(state.theta_d.values()),
                           state.g_spec, theta_g, batch);
  };
}

double optimal_classic_discriminator(double p_r, double p_g) {
  require(p_r >= 0 && p_g >= 0, "optimal_classic_discriminator: densities must be nonnegative");
  require(p_r + p_g > 0, "optimal_classic_discriminator: both densities are zero");
  return p_r / (p_r + p_g);
}

double fenchel_identity_residual(const FGanFamily& family, double t) {
  require(family.in_f_domain(t), "fenchel_identity_residual: t outside Dom(f)");
  const double slope = family.f_prime(t);
  return std::abs(family.f_star(slope) - (t * slope - family.f(t)));
}

GanState enforce_constraint(const GanState& state) {
  GanState out = state;
  if (const auto* w = std::get_if<WassersteinClip>(&state.objective))
    out.theta_d = state.theta_d.with_values(clip_params(state.theta_d.values(), w->clip));
  return out;
}

}  // namespace proxgap
