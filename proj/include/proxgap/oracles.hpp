#pragma once

#include "proxgap/game.hpp"
#include "proxgap/objectives.hpp"
#include "proxgap/rng.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace proxgap {

/// Axis-aligned closed box, one interval per dimension.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box cube(Eigen::Index dim, double lo, double hi);
  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Eigen::VectorXd& x, double slack = 0.0) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  void validate() const;
};

enum class ToyKind { bilinear, concave_quadratic, saddle_shift };

/// Low-dimensional zero-sum game with d maximizing and g minimizing:
///   bilinear            V = d·g
///   concave_quadratic   V = 2 d·g - |d|²
///   saddle_shift        V = (d - a)·(g - b)
struct ToyGame {
  ToyKind kind = ToyKind::bilinear;
  Box d_box;
  Box g_box;
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  static ToyGame bilinear(Eigen::Index dim = 1, double half_width = 1.0);
  static ToyGame concave_quadratic(Eigen::Index dim = 1, double half_width = 1.0);
  static ToyGame saddle_shift(Eigen::Index dim = 1, double a = 0.3, double b = -0.2,
                              double half_width = 1.0);

  Eigen::Index dim() const { return d_box.dim(); }
  std::string name() const;
  void validate() const;
  double value(const Eigen::VectorXd& d, const Eigen::VectorXd& g) const;
  ad::Var value(const ad::Var& d, const ad::Var& g) const;
};

std::vector<ToyGame> shipped_toy_games(Eigen::Index dim = 1);

struct ToyPoint {
  Eigen::VectorXd d;
  Eigen::VectorXd g;
};

ToyPoint random_toy_point(const ToyGame& game, Rng& rng);

struct GridSpec {
  int points_per_dim = 401;
  void validate() const;
};

/// Candidate set for a search: the tensor grid over `box`. Columns are
/// points; column j has per-dimension indices j = i_0 + n i_1 + ...
Eigen::MatrixXd grid_points(const Box& box, const GridSpec& grid);

struct Extremum {
  Eigen::VectorXd arg;
  double value = 0;
};

// Every search below ranges over the grid plus the current point of the
// searching player, so grid gaps are exactly nonnegative and the λ → ∞ limit
// is attained. Ties keep the lowest candidate index; the current point is
// the last candidate.

/// max over d̃ of V(d̃, g).
Extremum grid_best_d(const ToyGame& game, const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                     const GridSpec& grid);
/// min over g̃ of V(d, g̃).
Extremum grid_best_g(const ToyGame& game, const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                     const GridSpec& grid);

double grid_dg(const ToyGame& game, const ToyPoint& point, const GridSpec& grid);

/// max over d̃ of V(d̃, g) - λ|d̃ - anchor_d|²; arg is the maximizer.
Extremum grid_v_lambda_argmax(const ToyGame& game, const Eigen::VectorXd& anchor_d,
                              const Eigen::VectorXd& g, double lambda, const GridSpec& grid);
double grid_v_lambda(const ToyGame& game, const Eigen::VectorXd& anchor_d,
                     const Eigen::VectorXd& g, double lambda, const GridSpec& grid);

/// min over g̃ of V^λ(d, g̃); arg is the minimizer.
Extremum grid_v_gw_lambda(const ToyGame& game, const ToyPoint& point, double lambda,
                          const GridSpec& grid);

double grid_dg_lambda(const ToyGame& game, const ToyPoint& point, double lambda,
                      const GridSpec& grid);

enum class EquilibriumLabel { nash, proximal_only, stackelberg_only, none };

std::string label_name(EquilibriumLabel label);

struct EquilibriumClass {
  EquilibriumLabel label = EquilibriumLabel::none;
  /// For proximal_only: the largest tested λ > 0 with DG^λ < tol.
  double lambda = 0;
  std::vector<double> lambdas;
  std::vector<double> dg_lambda;
  double dg = 0;
  double tol = 0;
};

/// Label from precomputed gaps. Throws ConsistencyError if the gaps break
/// the hierarchy (DG^λ' < tol ⇒ DG^λ0 < tol for λ0 ≤ λ') or exceed DG.
EquilibriumClass classify_gaps(double dg, const std::vector<double>& lambdas,
                               const std::vector<double>& dg_lambda, double tol);

EquilibriumClass classify_equilibrium(const ToyGame& game, const ToyPoint& point,
                                      const std::vector<double>& lambdas, const GridSpec& grid,
                                      double tol);

/// Toy game seen by the gradient estimators. The discriminator distance is
/// |θ̃_d - anchor|², and both players are projected onto their boxes.
class ToyAdversarialGame final : public AdversarialGame {
public:
  explicit ToyAdversarialGame(ToyGame game);

  ad::Var value(ad::Tape& tape, const ad::Var& theta_d, const ad::Var& theta_g,
                const Batch& batch) const override;
  ad::Var discriminator_distance_sq(ad::Tape& tape, const ad::Var& theta_d,
                                    const Eigen::VectorXd& anchor,
                                    const Batch& batch) const override;
  Eigen::VectorXd project_discriminator(Eigen::VectorXd theta) const override;
  Eigen::VectorXd project_generator(Eigen::VectorXd theta) const override;

  const ToyGame& game() const { return game_; }

private:
  ToyGame game_;
};

struct OracleRow {
  std::string game;
  ToyPoint point;
  double lambda = 0;
  double dg = 0;
  double dg_lambda = 0;
};

/// Header: game,d,g,lambda,dg,dg_lambda. Vector coordinates are joined with ';'.
std::string oracle_csv(const std::vector<OracleRow>& rows);

using Density = std::function<double(const Eigen::VectorXd&)>;

/// Trapezoidal rule with `resolution` nodes per dimension.
double trapezoid(const Density& f, const Box& box, int resolution);

/// Jensen-Shannon divergence, natural log.
double numeric_jsd(const Density& p, const Density& q, const Box& box, int resolution);

/// ∫ p f(q/p). Where p vanishes the integrand is q·f(t)/t at t = 1e12;
/// where only q vanishes it is p·f(1e-12).
double numeric_fdiv(const FGanFamily& family, const Density& p, const Density& q, const Box& box,
                    int resolution);

/// Smoothing added to every histogram cell probability.
inline constexpr double kHistogramEps = 1e-12;

/// Discrete JSD between histograms of two sample sets on a shared box with
/// `bins` cells per dimension. Samples outside the box go to edge cells.
double jsd_from_samples(const Eigen::MatrixXd& samples_p, const Eigen::MatrixXd& samples_q,
                        int bins, const Box& box);
/// Box: the joint bounding box of both sample sets.
double jsd_from_samples(const Eigen::MatrixXd& samples_p, const Eigen::MatrixXd& samples_q,
                        int bins);

/// ∫ |F_p - F_q| between empirical CDFs; for equal counts this is the mean
/// absolute difference of sorted samples.
double wasserstein1_1d(std::vector<double> samples_p, std::vector<double> samples_q);

}  // namespace proxgap
