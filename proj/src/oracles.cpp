#include "proxgap/oracles.hpp"

#include "proxgap/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace proxgap {

Box Box::cube(Eigen::Index dim, double lo, double hi) {
  return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
}

bool Box::contains(const Eigen::VectorXd& x, double slack) const {
  return x.size() == dim() && (x.array() >= lo.array() - slack).all() &&
         (x.array() <= hi.array() + slack).all();
}

Eigen::VectorXd Box::project(const Eigen::VectorXd& x) const {
  require(x.size() == dim(), "Box::project: dimension mismatch");
  return x.cwiseMax(lo).cwiseMin(hi);
}

void Box::validate() const {
  require(dim() >= 1 && lo.size() == hi.size(), "Box: lo and hi must have the same positive size");
  require((lo.array() < hi.array()).all() && lo.allFinite() && hi.allFinite(),
          "Box: every interval must be finite and non-degenerate");
}

ToyGame ToyGame::bilinear(Eigen::Index dim, double half_width) {
  ToyGame g;
  g.kind = ToyKind::bilinear;
  g.d_box = g.g_box = Box::cube(dim, -half_width, half_width);
  g.a = g.b = Eigen::VectorXd::Zero(dim);
  g.validate();
  return g;
}

ToyGame ToyGame::concave_quadratic(Eigen::Index dim, double half_width) {
  auto g = bilinear(dim, half_width);
  g.kind = ToyKind::concave_quadratic;
  return g;
}

ToyGame ToyGame::saddle_shift(Eigen::Index dim, double a, double b, double half_width) {
  auto g = bilinear(dim, half_width);
  g.kind = ToyKind::saddle_shift;
  g.a = Eigen::VectorXd::Constant(dim, a);
  g.b = Eigen::VectorXd::Constant(dim, b);
  g.validate();
  return g;
}

std::string ToyGame::name() const {
  switch (kind) {
    case ToyKind::bilinear: return "bilinear";
    case ToyKind::concave_quadratic: return "concave_quadratic";
    case ToyKind::saddle_shift: return "saddle_shift";
  }
  return "unknown";
}

void ToyGame::validate() const {
  d_box.validate();
  g_box.validate();
  require(d_box.dim() == g_box.dim() && d_box.dim() <= 2, "ToyGame: d_dim = g_dim <= 2");
  require(a.size() == dim() && b.size() == dim(), "ToyGame: offsets must match the dimension");
}

double ToyGame::value(const Eigen::VectorXd& d, const Eigen::VectorXd& g) const {
  require(d.size() == dim() && g.size() == dim(), "ToyGame::value: dimension mismatch");
  switch (kind) {
    case ToyKind::bilinear: return d.dot(g);
    case ToyKind::concave_quadratic: return 2.0 * d.dot(g) - d.squaredNorm();
    case ToyKind::saddle_shift: return (d - a).dot(g - b);
  }
  return 0.0;
}

ad::Var ToyGame::value(const ad::Var& d, const ad::Var& g) const {
  ad::Tape& tape = d.tape();
  switch (kind) {
    case ToyKind::bilinear: return ad::sum(ad::cwise_product(d, g));
    case ToyKind::concave_quadratic:
      return 2.0 * ad::sum(ad::cwise_product(d, g)) - ad::sum(ad::square(d));
    case ToyKind::saddle_shift:
      return ad::sum(ad::cwise_product(d - tape.constant(a), g - tape.constant(b)));
  }
  throw PreconditionError("ToyGame::value: unknown kind");
}

std::vector<ToyGame> shipped_toy_games(Eigen::Index dim) {
  return {ToyGame::bilinear(dim), ToyGame::concave_quadratic(dim), ToyGame::saddle_shift(dim)};
}

ToyPoint random_toy_point(const ToyGame& game, Rng& rng) {
  ToyPoint p{Eigen::VectorXd(game.dim()), Eigen::VectorXd(game.dim())};
  for (Eigen::Index i = 0; i < game.dim(); ++i) {
    p.d[i] = rng.uniform(game.d_box.lo[i], game.d_box.hi[i]);
    p.g[i] = rng.uniform(game.g_box.lo[i], game.g_box.hi[i]);
  }
  return p;
}

void GridSpec::validate() const {
  require(points_per_dim >= 3, "GridSpec: at least 3 points per dimension");
}

Eigen::MatrixXd grid_points(const Box& box, const GridSpec& grid) {
  box.validate();
  grid.validate();
  const Eigen::Index n = grid.points_per_dim;
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < box.dim(); ++k) total *= n;
  Eigen::MatrixXd pts(box.dim(), total);
  for (Eigen::Index j = 0; j < total; ++j) {
    Eigen::Index rest = j;
    for (Eigen::Index k = 0; k < box.dim(); ++k) {
      const Eigen::Index i = rest % n;
      rest /= n;
      // Endpoints are hit exactly.
      pts(k, j) = i == n - 1 ? box.hi[k]
                             : box.lo[k] + (box.hi[k] - box.lo[k]) * static_cast<double>(i) /
                                               static_cast<double>(n - 1);
    }
  }
  return pts;
}

namespace {

/// Candidates as columns: the grid, then `current`.
Eigen::MatrixXd candidates(const Box& box, const GridSpec& grid, const Eigen::VectorXd& current) {
  require(box.contains(current, 1e-12), "grid oracle: point outside the box");
  Eigen::MatrixXd pts = grid_points(box, grid);
  pts.conservativeResize(Eigen::NoChange, pts.cols() + 1);
  pts.col(pts.cols() - 1) = current;
  return pts;
}

/// V(c_j, g) for every column c_j of `cands`.
Eigen::RowVectorXd values_over_d(const ToyGame& game, const Eigen::MatrixXd& cands,
                                 const Eigen::VectorXd& g) {
  switch (game.kind) {
    case ToyKind::bilinear: return g.transpose() * cands;
    case ToyKind::concave_quadratic:
      return 2.0 * (g.transpose() * cands) - cands.colwise().squaredNorm();
    case ToyKind::saddle_shift:
      return (g - game.b).transpose() * (cands.colwise() - game.a);
  }
  throw PreconditionError("grid oracle: unknown kind");
}

/// V(d, c_j) for every column c_j of `cands`.
Eigen::RowVectorXd values_over_g(const ToyGame& game, const Eigen::VectorXd& d,
                                 const Eigen::MatrixXd& cands) {
  switch (game.kind) {
    case ToyKind::bilinear: return d.transpose() * cands;
    case ToyKind::concave_quadratic: {
      Eigen::RowVectorXd v = 2.0 * (d.transpose() * cands);
      return v.array() - d.squaredNorm();
    }
    case ToyKind::saddle_shift:
      return (d - game.a).transpose() * (cands.colwise() - game.b);
  }
  throw PreconditionError("grid oracle: unknown kind");
}

/// First index of the extreme entry.
Eigen::Index arg_extreme(const Eigen::RowVectorXd& v, bool maximize) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < v.size(); ++j)
    if (maximize ? v[j] > v[best] : v[j] < v[best]) best = j;
  return best;
}

Eigen::RowVectorXd penalized(const ToyGame& game, const Eigen::MatrixXd& d_cands,
                             const Eigen::VectorXd& anchor, const Eigen::VectorXd& g,
                             double lambda) {
  Eigen::RowVectorXd v = values_over_d(game, d_cands, g);
  if (lambda != 0.0) v -= lambda * (d_cands.colwise() - anchor).colwise().squaredNorm();
  return v;
}

}  // namespace

Extremum grid_best_d(const ToyGame& game, const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                     const GridSpec& grid) {
  const auto c = candidates(game.d_box, grid, d);
  const auto v = values_over_d(game, c, g);
  const auto j = arg_extreme(v, true);
  return {c.col(j), v[j]};
}

Extremum grid_best_g(const ToyGame& game, const Eigen::VectorXd& d, const Eigen::VectorXd& g,
                     const GridSpec& grid) {
  const auto c = candidates(game.g_box, grid, g);
  const auto v = values_over_g(game, d, c);
  const auto j = arg_extreme(v, false);
  return {c.col(j), v[j]};
}

double grid_dg(const ToyGame& game, const ToyPoint& point, const GridSpec& grid) {
  return grid_best_d(game, point.d, point.g, grid).value -
         grid_best_g(game, point.d, point.g, grid).value;
}

Extremum grid_v_lambda_argmax(const ToyGame& game, const Eigen::VectorXd& anchor_d,
                              const Eigen::VectorXd& g, double lambda, const GridSpec& grid) {
  require(lambda >= 0, "grid_v_lambda: lambda must be >= 0");
  const auto c = candidates(game.d_box, grid, anchor_d);
  const auto v = penalized(game, c, anchor_d, g, lambda);
  const auto j = arg_extreme(v, true);
  return {c.col(j), v[j]};
}

double grid_v_lambda(const ToyGame& game, const Eigen::VectorXd& anchor_d,
                     const Eigen::VectorXd& g, double lambda, const GridSpec& grid) {
  return grid_v_lambda_argmax(game, anchor_d, g, lambda, grid).value;
}

Extremum grid_v_gw_lambda(const ToyGame& game, const ToyPoint& point, double lambda,
                          const GridSpec& grid) {
  require(lambda >= 0, "grid_v_gw_lambda: lambda must be >= 0");
  const auto d_cands = candidates(game.d_box, grid, point.d);
  const auto g_cands = candidates(game.g_box, grid, point.g);
  require(static_cast<double>(d_cands.cols()) * static_cast<double>(g_cands.cols()) <= 1e9,
          "grid_v_gw_lambda: grid too fine for a nested search");
  Extremum best{g_cands.col(0), std::numeric_limits<double>::infinity()};
  for (Eigen::Index j = 0; j < g_cands.cols(); ++j) {
    const double v = penalized(game, d_cands, point.d, g_cands.col(j), lambda).maxCoeff();
    if (v < best.value) best = {g_cands.col(j), v};
  }
  return best;
}

double grid_dg_lambda(const ToyGame& game, const ToyPoint& point, double lambda,
                      const GridSpec& grid) {
  return grid_best_d(game, point.d, point.g, grid).value -
         grid_v_gw_lambda(game, point, lambda, grid).value;
}

std::string label_name(EquilibriumLabel label) {
  switch (label) {
    case EquilibriumLabel::nash: return "nash";
    case EquilibriumLabel::proximal_only: return "proximal_only";
    case EquilibriumLabel::stackelberg_only: return "stackelberg_only";
    case EquilibriumLabel::none: return "none";
  }
  return "unknown";
}

EquilibriumClass classify_gaps(double dg, const std::vector<double>& lambdas,
                               const std::vector<double>& dg_lambda, double tol) {
  require(!lambdas.empty() && lambdas.front() == 0.0 &&
              std::is_sorted(lambdas.begin(), lambdas.end()),
          "classify_equilibrium: lambda list must be ascending and start at 0");
  require(dg_lambda.size() == lambdas.size(), "classify_equilibrium: one gap per lambda");
  require(tol > 0, "classify_equilibrium: tol must be positive");
  EquilibriumClass out{EquilibriumLabel::none, 0.0, lambdas, dg_lambda, dg, tol};

  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    if (dg_lambda[j] > dg + 1e-12)
      throw ConsistencyError("classify_equilibrium: DG^lambda exceeds DG at lambda=" +
                             std::to_string(lambdas[j]));
    if (dg_lambda[j] >= tol) continue;
    for (std::size_t i = 0; i < j; ++i)
      if (dg_lambda[i] >= tol)
        throw ConsistencyError("classify_equilibrium: hierarchy violated between lambda=" +
                               std::to_string(lambdas[i]) + " and lambda=" +
                               std::to_string(lambdas[j]));
  }

  if (dg < tol) {
    out.label = EquilibriumLabel::nash;
    return out;
  }
  for (std::size_t j = lambdas.size(); j-- > 1;) {
    if (dg_lambda[j] < tol) {
      out.label = EquilibriumLabel::proximal_only;
      out.lambda = lambdas[j];
      return out;
    }
  }
  if (dg_lambda[0] < tol) out.label = EquilibriumLabel::stackelberg_only;
  return out;
}

EquilibriumClass classify_equilibrium(const ToyGame& game, const ToyPoint& point,
                                      const std::vector<double>& lambdas, const GridSpec& grid,
                                      double tol) {
  std::vector<double> gaps;
  gaps.reserve(lambdas.size());
  for (double l : lambdas) gaps.push_back(grid_dg_lambda(game, point, l, grid));
  return classify_gaps(grid_dg(game, point, grid), lambdas, gaps, tol);
}

ToyAdversarialGame::ToyAdversarialGame(ToyGame game) : game_(std::move(game)) {
  game_.validate();
}

ad::Var ToyAdversarialGame::value(ad::Tape&, const ad::Var& theta_d, const ad::Var& theta_g,
                                  const Batch&) const {
  return game_.value(theta_d, theta_g);
}

ad::Var ToyAdversarialGame::discriminator_distance_sq(ad::Tape& tape, const ad::Var& theta_d,
                                                      const Eigen::VectorXd& anchor,
                                                      const Batch&) const {
  return ad::sum(ad::square(theta_d - tape.constant(anchor)));
}

Eigen::VectorXd ToyAdversarialGame::project_discriminator(Eigen::VectorXd theta) const {
  return game_.d_box.project(theta);
}

Eigen::VectorXd ToyAdversarialGame::project_generator(Eigen::VectorXd theta) const {
  return game_.g_box.project(theta);
}

namespace {

std::string join(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

}  // namespace

std::string oracle_csv(const std::vector<OracleRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "game,d,g,lambda,dg,dg_lambda\n";
  for (const auto& r : rows)
    os << r.game << ',' << join(r.point.d) << ',' << join(r.point.g) << ',' << r.lambda << ','
       << r.dg << ',' << r.dg_lambda << '\n';
  return os.str();
}

double trapezoid(const Density& f, const Box& box, int resolution) {
  const auto nodes = grid_points(box, GridSpec{resolution});
  double cell = 1.0;
  for (Eigen::Index k = 0; k < box.dim(); ++k)
    cell *= (box.hi[k] - box.lo[k]) / static_cast<double>(resolution - 1);
  double total = 0.0;
  for (Eigen::Index j = 0; j < nodes.cols(); ++j) {
    double w = 1.0;
    Eigen::Index rest = j;
    for (Eigen::Index k = 0; k < box.dim(); ++k) {
      const Eigen::Index i = rest % resolution;
      rest /= resolution;
      if (i == 0 || i == resolution - 1) w *= 0.5;
    }
    total += w * f(nodes.col(j));
  }
  return total * cell;
}

namespace {

/// a log(a/b), with 0 log 0 = 0.
double xlogy_ratio(double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; }

}  // namespace

double numeric_jsd(const Density& p, const Density& q, const Box& box, int resolution) {
  const Density integrand = [&](const Eigen::VectorXd& x) {
    const double px = p(x), qx = q(x);
    const double m = 0.5 * (px + qx);
    return 0.5 * xlogy_ratio(px, m) + 0.5 * xlogy_ratio(qx, m);
  };
  return trapezoid(integrand, box, resolution);
}

double numeric_fdiv(const FGanFamily& family, const Density& p, const Density& q, const Box& box,
                    int resolution) {
  constexpr double kLargeRatio = 1e12;
  const Density integrand = [&](const Eigen::VectorXd& x) {
    const double px = p(x), qx = q(x);
    if (px > 0.0 && qx > 0.0) return px * family.f(qx / px);
    if (px > 0.0) return px * family.f(1.0 / kLargeRatio);
    if (qx > 0.0) return qx * family.f(kLargeRatio) / kLargeRatio;
    return 0.0;
  };
  return trapezoid(integrand, box, resolution);
}

double jsd_from_samples(const Eigen::MatrixXd& samples_p, const Eigen::MatrixXd& samples_q,
                        int bins, const Box& box) {
  require(samples_p.rows() > 0 && samples_q.rows() > 0, "jsd_from_samples: empty sample set");
  require(samples_p.cols() == samples_q.cols() && samples_p.cols() == box.dim(),
          "jsd_from_samples: dimension mismatch");
  require(bins >= 1, "jsd_from_samples: bins must be positive");
  box.validate();
  Eigen::Index cells = 1;
  for (Eigen::Index k = 0; k < box.dim(); ++k) {
    cells *= bins;
    require(cells <= 50'000'000, "jsd_from_samples: too many histogram cells");
  }

  const auto histogram = [&](const Eigen::MatrixXd& s) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cells);
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      Eigen::Index cell = 0, stride = 1;
      for (Eigen::Index k = 0; k < box.dim(); ++k) {
        const double u = (s(r, k) - box.lo[k]) / (box.hi[k] - box.lo[k]);
        const auto i = static_cast<Eigen::Index>(
            std::clamp(std::floor(u * bins), 0.0, static_cast<double>(bins - 1)));
        cell += i * stride;
        stride *= bins;
      }
      h[cell] += 1.0;
    }
    h /= static_cast<double>(s.rows());
    h.array() += kHistogramEps;
    return Eigen::VectorXd(h / h.sum());
  };

  const Eigen::VectorXd p = histogram(samples_p);
  const Eigen::VectorXd q = histogram(samples_q);
  double jsd = 0.0;
  for (Eigen::Index i = 0; i < cells; ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    jsd += 0.5 * xlogy_ratio(p[i], m) + 0.5 * xlogy_ratio(q[i], m);
  }
  return std::clamp(jsd, 0.0, std::numbers::ln2);
}

double jsd_from_samples(const Eigen::MatrixXd& samples_p, const Eigen::MatrixXd& samples_q,
                        int bins) {
  require(samples_p.rows() > 0 && samples_q.rows() > 0, "jsd_from_samples: empty sample set");
  require(samples_p.cols() == samples_q.cols(), "jsd_from_samples: dimension mismatch");
  Box box{samples_p.colwise().minCoeff().cwiseMin(samples_q.colwise().minCoeff()).transpose(),
          samples_p.colwise().maxCoeff().cwiseMax(samples_q.colwise().maxCoeff()).transpose()};
  // A degenerate axis gets a unit-width interval.
  for (Eigen::Index k = 0; k < box.dim(); ++k)
    if (!(box.hi[k] > box.lo[k])) {
      box.lo[k] -= 0.5;
      box.hi[k] += 0.5;
    }
  return jsd_from_samples(samples_p, samples_q, bins, box);
}

double wasserstein1_1d(std::vector<double> p, std::vector<double> q) {
  require(!p.empty() && !q.empty(), "wasserstein1_1d: empty sample set");
  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  if (p.size() == q.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
    return total / static_cast<double>(p.size());
  }
  // Sweep the merged support; between consecutive breakpoints both CDFs are constant.
  const double np = static_cast<double>(p.size()), nq = static_cast<double>(q.size());
  std::size_t i = 0, j = 0;
  double total = 0.0;
  double prev = std::min(p.front(), q.front());
  while (i < p.size() || j < q.size()) {
    const double x = j == q.size() || (i < p.size() && p[i] <= q[j]) ? p[i] : q[j];
    total += std::abs(static_cast<double>(i) / np - static_cast<double>(j) / nq) * (x - prev);
    prev = x;
    while (i < p.size() && p[i] == x) ++i;
    while (j < q.size() && q[j] == x) ++j;
  }
  return total;
}

}  // namespace proxgap
