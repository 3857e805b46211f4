#include "proxgap/harness.hpp"

#include "proxgap/calculus.hpp"
#include "proxgap/error.hpp"
#include "proxgap/oracles.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace proxgap {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDataStream = 10;
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kTrainStream = 12;
constexpr std::uint64_t kGapStream = 13;
constexpr std::uint64_t kHistStream = 14;
constexpr std::uint64_t kProbeStream = 15;
static_assert(kDataStream == 10, "make_experiment_splits uses stream 10");

std::string cell(const std::optional<double>& x) { return x ? format_real(*x) : "failed"; }

std::optional<double> parse_cell(const std::string& text) {
  if (text == "failed") return std::nullopt;
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && !text.empty(), "metrics: bad cell '" + text + "'");
  return x;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), "cannot write '" + path.string() + "'");
  out << text;
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

std::string checkpoint_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%07d.pxgc", step);
  return buf;
}

Batch draw_batch(const Eigen::MatrixXd& pool, Eigen::Index latent_dim, Eigen::Index n, Rng& rng) {
  Batch b;
  b.real.resize(n, pool.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    b.real.row(i) = pool.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(pool.rows()))));
  b.latent = rng.normal_matrix(n, latent_dim);
  return b;
}

void check_finite(const ValueAndGrad& vg, const char* who, int step) {
  if (!std::isfinite(vg.value) || !vg.grad.allFinite())
    throw NumericalError(std::string("train: non-finite ") + who + " loss at step " +
                         std::to_string(step));
}

/// One discriminator update; returns V on the minibatch before the update.
double discriminator_update(TrainingState& st, const Batch& batch, int step) {
  const auto vg = value_and_grad(discriminator_loss_fn(st.gan, batch), st.gan.theta_d.values());
  check_finite(vg, "discriminator", step);
  st.gan.theta_d = st.gan.theta_d.with_values(adam_step(st.gan.theta_d.values(), vg.grad, st.d_opt));
  st.gan = enforce_constraint(st.gan);
  return -vg.value;
}

double generator_update(TrainingState& st, const Batch& batch, int step) {
  const auto vg = value_and_grad(generator_loss_fn(st.gan, batch), st.gan.theta_g.values());
  check_finite(vg, "generator", step);
  st.gan.theta_g = st.gan.theta_g.with_values(adam_step(st.gan.theta_g.values(), vg.grad, st.g_opt));
  return vg.value;
}

struct Loaded {
  LoadedCheckpoint ckpt;
  DataSplits splits;
};

Loaded load(const std::string& checkpoint, const ExperimentConfig* override_cfg) {
  Loaded l{load_checkpoint(checkpoint, override_cfg), {}};
  l.splits = make_experiment_splits(l.ckpt.config);
  return l;
}

void ensure_dir(const std::string& dir) {
  require(!dir.empty(), "output directory must be given");
  fs::create_directories(dir);
}

nlohmann::ordered_json versions_json() {
  return {{"proxgap", kVersion},
          {"metrics_schema", kMetricsSchemaVersion},
          {"checkpoint_format", kCheckpointVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"cxx_standard", __cplusplus}};
}

nlohmann::ordered_json run_summary(const std::vector<MetricsRow>& rows) {
  nlohmann::ordered_json s;
  std::vector<const MetricsRow*> complete;
  for (const auto& r : rows)
    if (r.complete()) complete.push_back(&r);
  s["checkpoints"] = rows.size();
  s["complete_checkpoints"] = complete.size();
  if (complete.empty()) return s;
  s["initial_dg_lambda"] = *complete.front()->dg_lambda;
  s["final_dg_lambda"] = *complete.back()->dg_lambda;
  s["final_dg_plain"] = *complete.back()->dg_plain;
  s["final_hist_jsd"] = *complete.back()->hist_jsd;
  double margin = std::numeric_limits<double>::infinity();
  for (const auto* r : complete) margin = std::min(margin, *r->dg_lambda - *r->hist_jsd);
  // DG^λ ≥ JSD − 0.1 at every checkpoint iff this is ≥ −0.1.
  s["min_dg_lambda_minus_hist_jsd"] = margin;
  try {
    const auto c = correlate(rows);
    s["pearson_dg_lambda_hist_jsd"] = c.r_lambda;
    s["pearson_dg_plain_hist_jsd"] = c.r_plain;
  } catch (const PreconditionError& e) {
    s["pearson_unavailable"] = e.what();
  }
  return s;
}

void write_report(const fs::path& dir, const ExperimentConfig& cfg, const TrainResult& result,
                  double elapsed_ms) {
  nlohmann::ordered_json report;
  report["status"] = result.failed ? "failed" : "completed";
  if (result.failed) {
    report["failed_step"] = result.failed_step;
    report["failure"] = result.failure;
  }
  report["versions"] = versions_json();
  report["config"] = config_entries(cfg);
  report["epoch_mapping"] = {{"worst_epochs", cfg.gap.worst_epochs},
                             {"search_rows", cfg.splits.search},
                             {"batch", cfg.gap.prox.batch_size},
                             {"worst_iters_override", cfg.gap.worst_iters_override},
                             {"worst_iters", cfg.worst_iters()}};
  report["checkpoint_interval"] = cfg.checkpoint_interval();
  report["summary"] = run_summary(result.rows);
  report["elapsed_ms"] = elapsed_ms;
  write_text(dir / "report.json", report.dump(2) + "\n");
}

}  // namespace

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.step) + "," + cell(r.v_d) + "," + cell(r.v_g) + "," + cell(r.dg_plain) +
         "," + cell(r.dg_lambda) + "," + cell(r.hist_jsd) + "," + format_real(r.wallclock_ms);
}

MetricsRow parse_metrics_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string c;
  std::istringstream in(line);
  while (std::getline(in, c, ',')) cells.push_back(c);
  require(cells.size() == 7, "metrics: expected 7 cells in '" + line + "'");
  MetricsRow r;
  const auto step = parse_cell(cells[0]);
  require(step && *step == std::floor(*step), "metrics: bad step in '" + line + "'");
  r.step = static_cast<int>(*step);
  r.v_d = parse_cell(cells[1]);
  r.v_g = parse_cell(cells[2]);
  r.dg_plain = parse_cell(cells[3]);
  r.dg_lambda = parse_cell(cells[4]);
  r.hist_jsd = parse_cell(cells[5]);
  const auto ms = parse_cell(cells[6]);
  r.wallclock_ms = ms.value_or(0.0);
  return r;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "metrics: cannot open '" + path + "'");
  std::string line;
  require(std::getline(in, line) && line == kMetricsHeader,
          "metrics: '" + path + "' does not start with the metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_metrics_row(line));
  return rows;
}

TrainingState initial_state(const ExperimentConfig& cfg) {
  cfg.validate();
  Rng init = Rng(cfg.seed).fork(kInitStream);
  TrainingState st;
  st.gan.d_spec = cfg.d_spec();
  st.gan.g_spec = cfg.g_spec();
  st.gan.objective = cfg.objective_kind();
  st.gan.theta_d = init_network(st.gan.d_spec, init);
  st.gan.theta_g = init_network(st.gan.g_spec, init);
  st.gan = enforce_constraint(st.gan);
  st.gan.validate();
  st.d_opt = AdamState<double>::fresh(st.gan.theta_d.size(), cfg.train.lr_d, cfg.train.beta1,
                                      cfg.train.beta2);
  st.g_opt = AdamState<double>::fresh(st.gan.theta_g.size(), cfg.train.lr_g, cfg.train.beta1,
                                      cfg.train.beta2);
  st.rng = Rng(cfg.seed).fork(kTrainStream);
  return st;
}

double generator_hist_jsd(const GanState& gan, const DataSplits& splits,
                          const ExperimentConfig& cfg) {
  const Eigen::Index n = cfg.metrics.samples > 0 ? cfg.metrics.samples : splits.evaluation.rows();
  Rng rng = Rng(cfg.seed).fork(kHistStream);
  const Eigen::MatrixXd fake = forward(gan.g_spec, gan.theta_g, rng.normal_matrix(n, gan.latent_dim()));
  if (!fake.allFinite()) throw NumericalError("hist_jsd: non-finite generator output");
  const Box box{splits.evaluation.colwise().minCoeff().transpose().array() - 1.0,
                splits.evaluation.colwise().maxCoeff().transpose().array() + 1.0};
  return jsd_from_samples(fake, splits.evaluation, cfg.metrics.bins, box);
}

TrainResult train(const ExperimentConfig& cfg, const std::string& run_dir) {
  cfg.validate();
  require(!run_dir.empty(), "train: output directory must be given");
  require(!fs::exists(run_dir), "train: run directory '" + run_dir + "' already exists");
  fs::create_directories(fs::path(run_dir).parent_path().empty() ? fs::path(".")
                                                                 : fs::path(run_dir).parent_path());
  require(fs::create_directory(run_dir), "train: cannot create '" + run_dir + "'");
  const fs::path dir(run_dir);
  fs::create_directory(dir / "checkpoints");

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  const DataSplits splits = make_experiment_splits(cfg);
  const ProximalConfig prox = cfg.proximal();
  const Rng gap_rng = Rng(cfg.seed).fork(kGapStream);
  const int interval = cfg.checkpoint_interval();

  TrainResult result;
  result.run_dir = run_dir;
  std::ofstream metrics(dir / "metrics.csv", std::ios::trunc);
  require(static_cast<bool>(metrics), "train: cannot write metrics.csv");
  metrics << kMetricsHeader << "\n";

  const auto emit = [&](const MetricsRow& row) {
    result.rows.push_back(row);
    metrics << format_metrics_row(row) << "\n";
    metrics.flush();
  };
  const auto fail = [&](int step, const std::string& what) {
    result.failed = true;
    result.failed_step = step;
    result.failure = what;
    MetricsRow row;
    row.step = step;
    row.wallclock_ms = elapsed_ms();
    emit(row);
  };

  TrainingState st = initial_state(cfg);
  double sum_d = 0, sum_g = 0;
  int n_d = 0, n_g = 0;

  const auto checkpoint = [&]() -> bool {
    MetricsRow row;
    row.step = st.step;
    try {
      if (st.step == 0) {
        const GapData data = make_gap_data(splits, cfg.latent_dim, gap_rng.fork(1));
        const double v = game_value(GanGame(st.gan, prox.sobolev_h), st.gan.theta_d.values(),
                                    st.gan.theta_g.values(), data.evaluation);
        row.v_d = v;
        row.v_g = v;
      } else {
        row.v_d = n_d ? sum_d / n_d : std::numeric_limits<double>::quiet_NaN();
        row.v_g = n_g ? sum_g / n_g : std::numeric_limits<double>::quiet_NaN();
      }
      const GapReport gap = duality_gap(st.gan, splits, prox, gap_rng);
      row.dg_plain = gap.dg_plain;
      row.dg_lambda = gap.dg_lambda;
      row.hist_jsd = generator_hist_jsd(st.gan, splits, cfg);
    } catch (const NumericalError& e) {
      fail(st.step, e.what());
      return false;
    }
    sum_d = sum_g = 0;
    n_d = n_g = 0;
    save_checkpoint((dir / "checkpoints" / checkpoint_name(st.step)).string(), st, cfg);
    row.wallclock_ms = elapsed_ms();
    emit(row);
    return true;
  };

  bool ok = checkpoint();
  const int d_steps = cfg.train.ratio > 0 ? cfg.train.ratio : 1;
  const int g_steps = cfg.train.ratio > 0 ? 1 : -cfg.train.ratio;
  while (ok && st.step < cfg.train.steps) {
    const int cycle = st.step + 1;
    try {
      for (int i = 0; i < d_steps; ++i) {
        sum_d += discriminator_update(
            st, draw_batch(splits.train, cfg.latent_dim, cfg.train.batch_size, st.rng), cycle);
        ++n_d;
      }
      for (int i = 0; i < g_steps; ++i) {
        sum_g += generator_update(
            st, draw_batch(splits.train, cfg.latent_dim, cfg.train.batch_size, st.rng), cycle);
        ++n_g;
      }
    } catch (const NumericalError& e) {
      fail(cycle, e.what());
      break;
    }
    st.step = cycle;
    if (st.step % interval == 0) ok = checkpoint();
  }
  metrics.close();
  write_report(dir, cfg, result, elapsed_ms());
  return result;
}

GapReport gap_cmd(const std::string& checkpoint, const std::string& out_dir,
                  const ExperimentConfig* override_cfg) {
  const auto l = load(checkpoint, override_cfg);
  const auto& cfg = l.ckpt.config;
  const GapReport r =
      duality_gap(l.ckpt.state.gan, l.splits, cfg.proximal(), Rng(cfg.seed).fork(kGapStream));
  ensure_dir(out_dir);
  write_text(fs::path(out_dir) / "gap.csv",
             "step,lambda,v_dw,v_gw_lambda,dg_lambda,v_gw_plain,dg_plain,worst_iters\n" +
                 std::to_string(l.ckpt.state.step) + "," + format_real(r.lambda) + "," +
                 format_real(r.v_dw) + "," + format_real(r.v_gw_lambda) + "," +
                 format_real(r.dg_lambda) + "," + format_real(r.v_gw_plain) + "," +
                 format_real(r.dg_plain) + "," + std::to_string(r.worst_iters) + "\n");
  return r;
}

std::vector<double> default_lambdas() { return {1e-2, 1e-1, 1, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6}; }

std::vector<SweepPoint> lambda_sweep_cmd(const std::string& checkpoint,
                                         const std::vector<double>& lambdas,
                                         const std::string& out_dir,
                                         const ExperimentConfig* override_cfg) {
  require(!lambdas.empty(), "lambda-sweep: the lambda list is empty");
  const auto l = load(checkpoint, override_cfg);
  const auto& cfg = l.ckpt.config;
  const auto points = lambda_sweep(l.ckpt.state.gan, l.splits, lambdas, cfg.proximal(),
                                   Rng(cfg.seed).fork(kGapStream));
  std::string csv = "lambda,v_dw,v_gw_lambda,dg_lambda,v_gw_plain,dg_plain\n";
  for (const auto& p : points)
    csv += format_real(p.lambda) + "," + format_real(p.report.v_dw) + "," +
           format_real(p.report.v_gw_lambda) + "," + format_real(p.report.dg_lambda) + "," +
           format_real(p.report.v_gw_plain) + "," + format_real(p.report.dg_plain) + "\n";
  ensure_dir(out_dir);
  write_text(fs::path(out_dir) / "lambda_sweep.csv", csv);
  return points;
}

std::vector<int> default_ratios() {
  std::vector<int> r;
  for (int n = -10; n <= 10; ++n)
    if (n != 0) r.push_back(n);
  return r;
}

std::vector<RatioRow> ratio_sweep_cmd(const ExperimentConfig& base, std::vector<int> ratios,
                                      const std::string& out_dir) {
  require(!ratios.empty(), "ratio-sweep: the ratio list is empty");
  for (int n : ratios) require(n != 0, "ratio-sweep: N = 0 is not a valid update ratio");
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
  ensure_dir(out_dir);

  std::vector<RatioRow> rows;
  for (int n : ratios) {
    ExperimentConfig cfg = base;
    cfg.train.ratio = n;
    RatioRow row{n, std::nullopt, std::nullopt};
    const TrainResult run = train(cfg, (fs::path(out_dir) / ("N_" + std::to_string(n))).string());
    if (!run.failed && !run.rows.empty() && run.rows.back().complete()) {
      row.final_dg_lambda = run.rows.back().dg_lambda;
      row.final_hist_jsd = run.rows.back().hist_jsd;
    }
    rows.push_back(row);
  }
  std::string csv = "N,final_dg_lambda,final_hist_jsd\n";
  for (const auto& r : rows)
    csv += std::to_string(r.ratio) + "," + cell(r.final_dg_lambda) + "," + cell(r.final_hist_jsd) + "\n";
  write_text(fs::path(out_dir) / "ratio_sweep.csv", csv);
  return rows;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "pearson: series lengths differ");
  require(x.size() >= 3, "pearson: at least 3 points are needed");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Map<const Eigen::VectorXd> a(x.data(), n), b(y.data(), n);
  const Eigen::VectorXd da = a.array() - a.mean(), db = b.array() - b.mean();
  const double saa = da.squaredNorm(), sbb = db.squaredNorm();
  require(saa > 0 && sbb > 0, "pearson: a series has zero variance");
  return std::clamp(da.dot(db) / std::sqrt(saa * sbb), -1.0, 1.0);
}

Correlation correlate(const std::vector<MetricsRow>& rows) {
  Correlation c;
  std::vector<double> lam, plain, jsd;
  for (const auto& r : rows) {
    if (!r.complete()) {
      ++c.excluded_rows;
      continue;
    }
    lam.push_back(*r.dg_lambda);
    plain.push_back(*r.dg_plain);
    jsd.push_back(*r.hist_jsd);
  }
  c.valid_rows = static_cast<int>(jsd.size());
  require(c.valid_rows >= 3, "correlate: fewer than 3 valid checkpoints");
  c.r_lambda = pearson(lam, jsd);
  c.r_plain = pearson(plain, jsd);
  return c;
}

Correlation correlate_file(const std::string& metrics_csv) { return correlate(read_metrics(metrics_csv)); }

void write_correlation(const Correlation& c, const std::string& out_dir) {
  ensure_dir(out_dir);
  nlohmann::ordered_json j;
  j["r_dg_lambda"] = c.r_lambda;
  j["r_dg_plain"] = c.r_plain;
  j["valid_rows"] = c.valid_rows;
  j["excluded_rows"] = c.excluded_rows;
  write_text(fs::path(out_dir) / "correlation.json", j.dump(2) + "\n");
}

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "deviation") return ProbeKind::deviation;
  if (name == "spectrum") return ProbeKind::spectrum;
  throw PreconditionError("probe: unknown kind '" + name + "' (expected deviation or spectrum)");
}

void probe_cmd(const std::string& checkpoint, ProbeKind kind, const std::string& out_dir,
               const ExperimentConfig* override_cfg) {
  const auto l = load(checkpoint, override_cfg);
  const auto& cfg = l.ckpt.config;
  const Rng rng = Rng(cfg.seed).fork(kProbeStream);
  ensure_dir(out_dir);
  if (kind == ProbeKind::deviation) {
    DeviationOptions opts;
    opts.steps = std::max(cfg.probe.steps, 1);
    opts.eval_every = cfg.probe.steps == 0 ? 0 : cfg.probe.eval_every;
    opts.lr = cfg.probe.lr;
    opts.batch_size = cfg.train.batch_size;
    opts.bins = cfg.metrics.bins;
    const auto trace = unilateral_deviation(l.ckpt.state.gan, l.splits, opts, rng);
    std::string csv = "step,v,hist_jsd\n";
    for (const auto& p : trace.points)
      csv += std::to_string(p.step) + "," + format_real(p.v) + "," + cell(p.divergence) + "\n";
    write_text(fs::path(out_dir) / "deviation.csv", csv);
    return;
  }
  SpectrumOptions opts;
  opts.k = cfg.probe.k;
  opts.max_iters = cfg.probe.max_iters;
  opts.batch_rows = cfg.probe.batch_rows;
  const auto r = hessian_spectrum_probe(l.ckpt.state.gan, l.splits, parse_agent(cfg.probe.agent),
                                        opts, rng);
  nlohmann::ordered_json j;
  j["step"] = l.ckpt.state.step;
  j["agent"] = agent_name(r.agent);
  j["k"] = opts.k;
  j["eigenvalues"] = r.eigenvalues;
  j["nash_consistent"] = r.nash_consistent;
  j["tolerance"] = r.tol;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  write_text(fs::path(out_dir) / "spectrum.json", j.dump(2) + "\n");
}

}  // namespace proxgap
