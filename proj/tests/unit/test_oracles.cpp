#include "doctest.h"
#include "test_support.hpp"

#include "proxgap/calculus.hpp"
#include "proxgap/error.hpp"
#include "proxgap/oracles.hpp"

#include <cmath>
#include <numbers>

using namespace proxgap;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

ToyPoint pt(double d, double g) { return {v1(d), v1(g)}; }

const std::vector<double> kLambdas = {0, 0.01, 0.1, 1, 10, 100, 1e6};

double gauss(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

Density gauss_density(double mu, double sigma) {
  return [=](const Eigen::VectorXd& x) { return gauss(x[0], mu, sigma); };
}

/// KL(N(m1, s1²) ‖ N(m2, s2²)).
double gaussian_kl(double m1, double s1, double m2, double s2) {
  return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2 * s2 * s2) - 0.5;
}

}  // namespace

TEST_CASE("toy game values and validation") {
  const auto b = ToyGame::bilinear();
  CHECK(b.value(v1(0.5), v1(-2.0)) == -1.0);
  CHECK(ToyGame::concave_quadratic().value(v1(1.0), v1(1.0)) == 1.0);
  CHECK(ToyGame::saddle_shift(1, 0.3, -0.2).value(v1(0.3), v1(0.7)) == 0.0);
  CHECK(ToyGame::bilinear(2).value(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, -1)) == 1.0);
  CHECK_THROWS_AS(ToyGame::bilinear(3), PreconditionError);
  CHECK_THROWS_AS(GridSpec{2}.validate(), PreconditionError);
  CHECK_THROWS_AS(grid_dg(b, pt(1.5, 0), GridSpec{}), PreconditionError);
  auto bad = b;
  bad.d_box.hi[0] = bad.d_box.lo[0];
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("grid points cover the box with exact endpoints") {
  const auto pts = grid_points(Box::cube(2, -1, 1), GridSpec{5});
  REQUIRE(pts.cols() == 25);
  CHECK(pts(0, 0) == -1.0);
  CHECK(pts(0, 4) == 1.0);
  CHECK(pts(1, 5) == -0.5);
  CHECK(pts(1, 24) == 1.0);
}

TEST_CASE("grid_dg on the bilinear game") {
  const auto game = ToyGame::bilinear();
  const GridSpec grid;
  CHECK(std::abs(grid_dg(game, pt(0, 0), grid)) < 1e-12);
  CHECK(grid_dg(game, pt(1, 1), grid) == doctest::Approx(2.0).epsilon(1e-12));
  // max_d d g = |g|, min_g d g = -|d|
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_toy_point(game, rng);
    CHECK(grid_dg(game, p, grid) == doctest::Approx(std::abs(p.g[0]) + std::abs(p.d[0])).epsilon(1e-12));
  }
}

TEST_CASE("grid_dg is nonnegative on a 21x21 configuration sample") {
  const GridSpec grid{101};
  for (const auto& game : shipped_toy_games()) {
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j)
        worst = std::min(worst, grid_dg(game, pt(-1 + 0.1 * i, -1 + 0.1 * j), grid));
    CHECK_MESSAGE(worst >= 0.0, game.name());
  }
}

TEST_CASE("zero grid gap exactly where no unilateral grid deviation improves") {
  const GridSpec grid{41};
  const auto nodes = grid_points(Box::cube(1, -1, 1), grid);
  for (const auto& game : shipped_toy_games()) {
    int nash_points = 0;
    for (Eigen::Index i = 0; i < nodes.cols(); ++i) {
      for (Eigen::Index j = 0; j < nodes.cols(); ++j) {
        const ToyPoint p{nodes.col(i), nodes.col(j)};
        const double here = game.value(p.d, p.g);
        // Independent best-response search.
        bool improvable = false;
        for (Eigen::Index k = 0; k < nodes.cols() && !improvable; ++k)
          improvable = game.value(nodes.col(k), p.g) > here + 1e-12 ||
                       game.value(p.d, nodes.col(k)) < here - 1e-12;
        const bool zero_gap = grid_dg(game, p, grid) < 1e-12;
        CHECK_MESSAGE(zero_gap == !improvable, game.name() << " at " << p.d[0] << "," << p.g[0]);
        nash_points += zero_gap;
      }
    }
    CHECK_MESSAGE(nash_points == 1, game.name());
  }
}

TEST_CASE("grid_v_lambda limits") {
  const GridSpec grid;
  Rng rng(5);
  for (const auto& game : shipped_toy_games()) {
    for (int i = 0; i < 10; ++i) {
      const auto p = random_toy_point(game, rng);
      CHECK(grid_v_lambda(game, p.d, p.g, 0.0, grid) ==
            grid_best_d(game, p.d, p.g, grid).value);
      CHECK(grid_v_lambda(game, p.d, p.g, 1e9, grid) ==
            doctest::Approx(game.value(p.d, p.g)).epsilon(1e-12));
    }
  }
  // Anchored at the inner argmax d = g the penalty vanishes: V^λ = g².
  const auto cq = ToyGame::concave_quadratic();
  for (double g : {-0.8, -0.3, 0.0, 0.45, 1.0})
    for (double l : kLambdas)
      CHECK(grid_v_lambda(cq, v1(g), v1(g), l, grid) == doctest::Approx(g * g).epsilon(1e-12));
}

TEST_CASE("grid_dg_lambda on hand-solved configurations") {
  const GridSpec grid;
  const auto cq = ToyGame::concave_quadratic();
  for (double l : kLambdas) CHECK(std::abs(grid_dg_lambda(cq, pt(0, 0), l, grid)) < 1e-12);
  // Bilinear at (1,1), λ = 0: V^0(·, g') = |g'|, minimized at g' = 0.
  CHECK(grid_dg_lambda(ToyGame::bilinear(), pt(1, 1), 0.0, grid) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Concave quadratic at (0.5, 0): V^λ_Gw = -λ/4 for λ ≤ 2.
  for (double l : {0.1, 0.5, 1.0, 2.0})
    CHECK(grid_dg_lambda(cq, pt(0.5, 0), l, grid) == doctest::Approx(0.25 * l).epsilon(1e-3));
}

TEST_CASE("DG^lambda is nondecreasing in lambda and reaches DG") {
  const GridSpec grid;
  Rng rng(7);
  for (const auto& game : shipped_toy_games()) {
    for (int i = 0; i < 10; ++i) {
      const auto p = random_toy_point(game, rng);
      double prev = -1e300;
      for (double l : kLambdas) {
        const double v = grid_dg_lambda(game, p, l, grid);
        CHECK(v >= prev - 1e-6);
        prev = v;
      }
      CHECK(std::abs(prev - grid_dg(game, p, grid)) < 1e-3);
    }
  }
}

TEST_CASE("DG^lambda lies between the divergence floor and DG") {
  // DIV(g) = V_Dw(g) - min V_Dw over the same candidates.
  const GridSpec grid{201};
  Rng rng(9);
  for (const auto& game : shipped_toy_games()) {
    const auto nodes = grid_points(game.g_box, grid);
    for (int i = 0; i < 10; ++i) {
      const auto p = random_toy_point(game, rng);
      double floor = grid_best_d(game, p.d, p.g, grid).value;
      for (Eigen::Index j = 0; j < nodes.cols(); ++j)
        floor = std::min(floor, grid_best_d(game, p.d, nodes.col(j), grid).value);
      const double div = grid_best_d(game, p.d, p.g, grid).value - floor;
      for (double l : kLambdas) {
        const double gap = grid_dg_lambda(game, p, l, grid);
        CHECK(gap >= div - 1e-12);
        CHECK(gap <= grid_dg(game, p, grid) + 1e-12);
      }
    }
  }
}

TEST_CASE("small-neighbourhood upper bound on DG^lambda - DIV") {
  const GridSpec grid{201};
  Rng rng(11);
  int premise_held = 0;
  for (const auto& game : shipped_toy_games()) {
    const auto nodes = grid_points(game.g_box, grid);
    for (int i = 0; i < 10; ++i) {
      auto p = random_toy_point(game, rng);
      p.d *= 0.1;  // near the equilibrium the premise can hold
      double floor = grid_best_d(game, p.d, p.g, grid).value;
      for (Eigen::Index j = 0; j < nodes.cols(); ++j)
        floor = std::min(floor, grid_best_d(game, p.d, nodes.col(j), grid).value);
      const double div = grid_best_d(game, p.d, p.g, grid).value - floor;
      for (double l : {0.1, 1.0, 10.0}) {
        const auto g_star = grid_v_gw_lambda(game, p, l, grid).arg;
        const auto d_hat = grid_best_d(game, p.d, g_star, grid).arg;
        const double dist = (d_hat - p.d).norm();
        const double excess = grid_dg_lambda(game, p, l, grid) - div;
        CHECK(excess <= l * dist * dist + 1e-12);
        for (double eps : {0.01, 0.1}) {
          if (dist < std::sqrt(eps / l)) {
            ++premise_held;
            CHECK(excess < eps);
          }
        }
      }
    }
  }
  CHECK(premise_held > 0);
}

TEST_CASE("equilibrium classification") {
  const GridSpec grid;
  const auto bil = ToyGame::bilinear();
  CHECK(classify_equilibrium(bil, pt(0, 0), kLambdas, grid, 1e-6).label == EquilibriumLabel::nash);
  CHECK(classify_equilibrium(bil, pt(1, 1), kLambdas, grid, 1e-6).label == EquilibriumLabel::none);
  for (int n : {201, 401, 801})
    CHECK(classify_equilibrium(ToyGame::concave_quadratic(), pt(0, 0), kLambdas, GridSpec{n}, 1e-6)
              .label == EquilibriumLabel::nash);
  // Best-responding follower at g = 0 but not Nash.
  const auto st = classify_equilibrium(ToyGame::concave_quadratic(), pt(0.5, 0), kLambdas, grid, 1e-6);
  CHECK(st.label == EquilibriumLabel::stackelberg_only);
  CHECK(st.dg == doctest::Approx(1.25));

  CHECK_THROWS_AS(classify_equilibrium(bil, pt(0, 0), {0.1, 1}, grid, 1e-6), PreconditionError);
  CHECK_THROWS_AS(classify_equilibrium(bil, pt(0, 0), {0, 1, 0.1}, grid, 1e-6), PreconditionError);
}

TEST_CASE("classification from synthetic gaps") {
  const std::vector<double> ls = {0, 0.1, 1, 10};
  const auto prox = classify_gaps(0.5, ls, {0, 0, 1e-9, 0.2}, 1e-6);
  CHECK(prox.label == EquilibriumLabel::proximal_only);
  CHECK(prox.lambda == 1.0);
  CHECK(classify_gaps(0.5, ls, {0, 0.1, 0.2, 0.3}, 1e-6).label == EquilibriumLabel::stackelberg_only);
  CHECK(classify_gaps(0.5, ls, {0.1, 0.1, 0.2, 0.3}, 1e-6).label == EquilibriumLabel::none);
  CHECK(classify_gaps(0.0, ls, {0, 0, 0, 0}, 1e-6).label == EquilibriumLabel::nash);
  CHECK_THROWS_AS(classify_gaps(0.5, ls, {0.1, 0, 0.2, 0.3}, 1e-6), ConsistencyError);
  CHECK_THROWS_AS(classify_gaps(0.5, ls, {0, 0, 0, 0.6}, 1e-6), ConsistencyError);
  CHECK(label_name(EquilibriumLabel::proximal_only) == "proximal_only");
}

TEST_CASE("two-dimensional games on a coarse grid") {
  const GridSpec grid{21};
  const auto game = ToyGame::bilinear(2);
  const ToyPoint origin{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  CHECK(std::abs(grid_dg(game, origin, grid)) < 1e-12);
  const ToyPoint corner{Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1)};
  CHECK(grid_dg(game, corner, grid) == doctest::Approx(4.0));
  double prev = -1.0;
  for (double l : {0.0, 1.0, 1e6}) {
    const double v = grid_dg_lambda(game, corner, l, grid);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  CHECK(std::abs(prev - 4.0) < 1e-9);
}

TEST_CASE("toy adapter agrees with the closed form") {
  Rng rng(13);
  for (const auto& game : shipped_toy_games(2)) {
    const ToyAdversarialGame adv(game);
    const Eigen::VectorXd d = Eigen::Vector2d(0.3, -0.6), g = Eigen::Vector2d(-0.2, 0.9);
    ad::Tape tape;
    CHECK(adv.value(tape, tape.constant(d), tape.constant(g), {}).scalar() ==
          doctest::Approx(game.value(d, g)).epsilon(1e-14));
    const Loss loss = [&](ad::Tape& t, const ad::Var& th) {
      return adv.value(t, th, t.constant(g), {}) -
             0.7 * adv.discriminator_distance_sq(t, th, g, {});
    };
    const auto an = grad_params(loss, d);
    const auto fd = finite_diff_grad(loss, d, 1e-5);
    CHECK((an - fd).norm() < 1e-8);
    CHECK(adv.project_discriminator(Eigen::Vector2d(3, -0.5)) == Eigen::Vector2d(1, -0.5));
    CHECK(adv.project_generator(Eigen::Vector2d(-3, 2)) == Eigen::Vector2d(-1, 1));
  }
}

TEST_CASE("oracle csv export") {
  std::vector<OracleRow> rows;
  const auto game = ToyGame::bilinear();
  for (double l : {0.0, 1.0})
    rows.push_back({game.name(), pt(1, 1), l, grid_dg(game, pt(1, 1), GridSpec{}),
                    grid_dg_lambda(game, pt(1, 1), l, GridSpec{})});
  const auto csv = oracle_csv(rows);
  CHECK(csv.rfind("game,d,g,lambda,dg,dg_lambda\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("bilinear,1,1,0,2,1\n") != std::string::npos);
}

TEST_CASE("numeric_jsd") {
  const auto box = Box::cube(1, -10, 20);
  const auto p = gauss_density(0, 1), q = gauss_density(10, 1);
  CHECK(std::abs(numeric_jsd(p, p, box, 3001)) < 1e-9);
  CHECK(numeric_jsd(p, q, box, 3001) == doctest::Approx(std::numbers::ln2).epsilon(1e-6));
  const auto r = gauss_density(0.7, 1.3);
  CHECK(std::abs(numeric_jsd(p, r, box, 3001) - numeric_jsd(r, p, box, 3001)) < 1e-12);
  CHECK(std::abs(trapezoid(p, box, 3001) - 1.0) < 1e-9);

  // 2-D product densities.
  const Density p2 = [](const Eigen::VectorXd& x) { return gauss(x[0], 0, 1) * gauss(x[1], 0, 1); };
  const Density q2 = [](const Eigen::VectorXd& x) { return gauss(x[0], 12, 1) * gauss(x[1], 0, 1); };
  const Box box2{Eigen::Vector2d(-8, -8), Eigen::Vector2d(20, 8)};
  CHECK(std::abs(trapezoid(p2, box2, 301) - 1.0) < 1e-6);
  CHECK(numeric_jsd(p2, q2, box2, 301) == doctest::Approx(std::numbers::ln2).epsilon(1e-5));
}

TEST_CASE("numeric_fdiv") {
  const auto box = Box::cube(1, -20, 20);
  const auto p = gauss_density(0, 1);
  for (auto kind : all_fgan_kinds())
    CHECK(std::abs(numeric_fdiv(make_fgan_family(kind), p, p, box, 4001)) < 1e-9);

  // The Jensen-Shannon generating f gives twice the JSD.
  const auto q = gauss_density(2, 1);
  const auto js = make_fgan_family(FGanKind::jensen_shannon_scaled);
  CHECK(std::abs(numeric_fdiv(js, p, q, box, 8001) - 2.0 * numeric_jsd(p, q, box, 8001)) < 1e-4);

  // ∫ p f(q/p) with f = t log t is KL(q ‖ p).
  const auto kl = make_fgan_family(FGanKind::kl);
  CHECK(std::abs(numeric_fdiv(kl, p, gauss_density(0.5, 1), box, 8001) - 0.125) < 1e-4);
  CHECK(std::abs(numeric_fdiv(kl, p, gauss_density(1, 2), box, 8001) - gaussian_kl(1, 2, 0, 1)) <
        1e-4);
  // Reverse KL (f = -log t) is KL(p ‖ q).
  const auto rkl = make_fgan_family(FGanKind::reverse_kl);
  CHECK(std::abs(numeric_fdiv(rkl, p, gauss_density(1, 2), box, 8001) - gaussian_kl(0, 1, 1, 2)) <
        1e-4);
  for (auto kind : all_fgan_kinds())
    CHECK(numeric_fdiv(make_fgan_family(kind), p, gauss_density(0.3, 1.1), box, 4001) >= -1e-9);
}

TEST_CASE("jsd_from_samples") {
  Rng rng(17);
  const Eigen::MatrixXd a = rng.normal_matrix(10000, 1);
  CHECK(jsd_from_samples(a, a, 64) == 0.0);
  Eigen::MatrixXd b = rng.normal_matrix(10000, 1);
  b.array() += 10.0;
  CHECK(std::abs(jsd_from_samples(a, b, 64) - std::numbers::ln2) < 0.02);

  Eigen::MatrixXd a2 = rng.normal_matrix(10000, 2), b2 = rng.normal_matrix(10000, 2);
  b2.col(0).array() += 10.0;
  CHECK(std::abs(jsd_from_samples(a2, b2, 64) - std::numbers::ln2) < 0.02);

  for (int i = 0; i < 10; ++i) {
    Eigen::MatrixXd x = rng.normal_matrix(500, 2), y = rng.normal_matrix(300, 2);
    y *= rng.uniform(0.5, 2.0);
    const double v = jsd_from_samples(x, y, 16);
    CHECK(v >= 0.0);
    CHECK(v <= std::numbers::ln2);
  }
  // Fixed box: out-of-box samples land in edge cells.
  const Eigen::MatrixXd lo = Eigen::MatrixXd::Constant(10, 1, -5.0);
  const Eigen::MatrixXd hi = Eigen::MatrixXd::Constant(10, 1, 5.0);
  CHECK(jsd_from_samples(lo, hi, 4, Box::cube(1, -1, 1)) == doctest::Approx(std::numbers::ln2));
  CHECK_THROWS_AS(jsd_from_samples(Eigen::MatrixXd(0, 1), a, 8), PreconditionError);
}

TEST_CASE("wasserstein1_1d") {
  CHECK(wasserstein1_1d({0.0}, {3.0}) == 3.0);
  CHECK(wasserstein1_1d({1, 5, 2, 2}, {2, 1, 2, 5}) == 0.0);
  CHECK(wasserstein1_1d({0, 1}, {0}) == doctest::Approx(0.5));
  CHECK(wasserstein1_1d({0, 0, 1, 1}, {0, 1}) == doctest::Approx(0.0));
  CHECK(wasserstein1_1d({0, 2}, {1, 1, 1}) == doctest::Approx(1.0));
  Rng rng(19);
  std::vector<double> u(10000), w(10000);
  for (auto& x : u) x = rng.uniform();
  for (auto& x : w) x = rng.uniform() + 0.5;
  CHECK(std::abs(wasserstein1_1d(u, w) - 0.5) < 0.02);
  CHECK_THROWS_AS(wasserstein1_1d({}, {1.0}), PreconditionError);
}
