#pragma once

#include "proxgap/ad.hpp"
#include "proxgap/calculus.hpp"
#include "proxgap/network.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <variant>

namespace proxgap {

enum class FGanKind { kl, reverse_kl, pearson_chi2, jensen_shannon_scaled };

/// Generator f of an f-divergence together with its Fenchel conjugate and
/// the map taking a raw discriminator output into Dom(f*).
struct FGanFamily {
  FGanKind kind;
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  std::function<double(double)> f_star;
  std::function<double(double)> f_star_prime;
  std::function<double(double)> output_map;
  std::function<double(double)> output_map_prime;
  /// Open upper end of Dom(f*); +inf when unbounded.
  double f_star_upper = 0.0;

  bool in_f_domain(double t) const { return t > 0.0 && std::isfinite(t); }
  bool in_f_star_domain(double x) const { return x < f_star_upper; }
};

FGanFamily make_fgan_family(FGanKind kind);
const std::vector<FGanKind>& all_fgan_kinds();

struct Classic {};
struct WassersteinClip {
  double clip = 0.01;
};
struct FGan {
  FGanKind family = FGanKind::kl;
};

using ObjectiveKind = std::variant<Classic, WassersteinClip, FGan>;

/// "classic", "wgan", "fgan-kl", "fgan-reverse-kl", "fgan-pearson", "fgan-js".
ObjectiveKind parse_objective(const std::string& name, double clip = 0.01);
std::string objective_name(const ObjectiveKind& kind);

/// Discriminator outputs are clamped into [eps, 1 - eps] before logs.
inline constexpr double kClassicClampEps = 1e-7;

/// One minibatch: real rows and latent rows.
struct Batch {
  Eigen::MatrixXd real;
  Eigen::MatrixXd latent;
};

struct GanState {
  NetworkSpec d_spec;
  NetworkSpec g_spec;
  ParamVector theta_d;
  ParamVector theta_g;
  ObjectiveKind objective;

  /// Checks dimensions, parameter counts and the head/objective pairing.
  void validate() const;
  Eigen::Index data_dim() const { return d_spec.input_dim; }
  Eigen::Index latent_dim() const { return g_spec.input_dim; }
};

/// V recorded on a tape. Either parameter may be a constant node.
ad::Var objective_value(const ObjectiveKind& kind, const NetworkSpec& d_spec,
                        const ad::Var& theta_d, const NetworkSpec& g_spec,
                        const ad::Var& theta_g, const Batch& batch);

/// Monte-Carlo estimate of V over the batch.
double eval_objective(const GanState& state, const Eigen::MatrixXd& real,
                      const Eigen::MatrixXd& latent);

/// -V; minimizing it is ascent on V.
double discriminator_ascent_loss(const GanState& state, const Batch& batch);
/// V.
double generator_descent_loss(const GanState& state, const Batch& batch);

/// The same two losses as functions of the player's own parameters.
Loss discriminator_loss_fn(const GanState& state, Batch batch);
Loss generator_loss_fn(const GanState& state, Batch batch);

/// Pointwise maximizer of the classic objective, p_r / (p_r + p_g).
double optimal_classic_discriminator(double p_r, double p_g);

/// |f*(f'(t)) - (t f'(t) - f(t))|.
double fenchel_identity_residual(const FGanFamily& family, double t);

/// Clips theta_d into the box for WassersteinClip; identity otherwise.
GanState enforce_constraint(const GanState& state);

}  // namespace proxgap
