#include "doctest.h"

#include "proxgap/checkpoint.hpp"
#include "proxgap/config.hpp"
#include "proxgap/error.hpp"
#include "proxgap/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

using namespace proxgap;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(# small enough for unit tests
seed = 5
split.train = 200
split.search = 128
split.eval = 200
net.d.hidden = 4
net.g.hidden = 4
train.steps = 10
train.checkpoint_every = 5
train.lr_d = 1e-3
train.lr_g = 1e-3
gap.prox_steps = 3
gap.worst_iters = 3
metrics.samples = 300
probe.steps = 6
probe.eval_every = 3
probe.k = 2
probe.max_iters = 50
probe.batch_rows = 64
)";

/// kTiny with the keys in `extra` replaced.
ExperimentConfig tiny(const std::string& extra = "") {
  std::map<std::string, std::string> keys = config_entries(parse_config(kTiny));
  for (const auto& [k, v] : config_entries(parse_config(extra)))
    if (extra.find(k + " =") != std::string::npos) keys[k] = v;
  std::string doc;
  for (const auto& [k, v] : keys) doc += k + " = " + v + "\n";
  return parse_config(doc);
}

/// Fresh scratch directory under the system temp dir.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("proxgap_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

/// Metrics text without the wall-clock column.
std::string without_wallclock(const fs::path& p) {
  std::string out;
  for (auto l : lines(slurp(p))) out += l.substr(0, l.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST_CASE("config defaults follow the optimizer tables") {
  const auto c = parse_config("");
  CHECK(c.objective == "classic");
  CHECK(c.train.lr_d == 1e-4);
  CHECK(c.train.lr_g == 2e-4);
  CHECK(c.train.beta1 == 0.0);
  CHECK(c.gap.prox.lambda == 0.1);
  CHECK(c.gap.prox.prox_steps == 20);
  CHECK(c.clip == 0.01);
  CHECK(c.worst_iters() == epochs_to_iters(10, 5000, 64));

  const auto w = parse_config("objective = wgan\n");
  CHECK(w.train.lr_d == 4e-4);
  CHECK(w.train.lr_g == 1e-4);
  CHECK(w.train.beta1 == 0.5);
  CHECK(w.d_spec().head == OutputHead::linear);
  CHECK(c.d_spec().head == OutputHead::sigmoid);
  // Explicit keys win over the table regardless of order.
  CHECK(parse_config("train.lr_d = 0.5\nobjective = wgan\n").train.lr_d == 0.5);
}

TEST_CASE("config syntax and validation") {
  const auto c = parse_config("  seed = 42   # trailing comment\n\n# whole line\nnet.g.hidden = 8, 3\n");
  CHECK(c.seed == 42);
  CHECK(c.g_hidden == std::vector<Eigen::Index>{8, 3});
  CHECK(parse_config("net.d.hidden = none\n").d_hidden.empty());

  CHECK_THROWS_AS(parse_config("nonsense.key = 1\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("seed\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("train.lr_d = fast\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("train.lr_d = 0\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("train.ratio = 0\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("train.steps = 100\ntrain.checkpoint_every = 7\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("objective = hinge\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("data.kind = spiral\n"), PreconditionError);
  CHECK_THROWS_AS(load_config("/nonexistent/proxgap.cfg"), PreconditionError);
}

TEST_CASE("config echo round trips") {
  const auto c = tiny("train.ratio = -3\nobjective = fgan-pearson\ndata.kind = ring\n");
  const auto back = parse_config(format_config(c));
  CHECK(config_entries(back) == config_entries(c));
  CHECK(back.train.ratio == -3);
}

TEST_CASE("checkpoint interval") {
  auto c = parse_config("train.steps = 5000\n");
  CHECK(c.checkpoint_interval() == 100);
  c.train.steps = 1234;  // 2% is 24.68; the nearest divisor below 25 is 2
  CHECK(1234 % c.checkpoint_interval() == 0);
  CHECK(c.checkpoint_interval() <= 25);
  c.train.steps = 10;
  CHECK(c.checkpoint_interval() == 1);
  c.train.steps = 0;
  CHECK(c.checkpoint_interval() == 1);
}

TEST_CASE("distribution from config") {
  auto c = parse_config("data.modes = 3\ndata.radius = 2\n");
  const auto dist = c.distribution();
  const auto& m = dist.mixture();
  CHECK(m.means(0, 0) == -2.0);
  CHECK(m.means(1, 0) == 0.0);
  CHECK(m.means(2, 0) == 2.0);
  CHECK(m.means.col(1).isZero());
  CHECK(m.variances(0, 0) == doctest::Approx(0.09));
  c.data.kind = "ring";
  CHECK(c.distribution().mixture().means.rows() == 3);
}

TEST_CASE("list parsing") {
  CHECK(parse_real_list("0.01, 1e6") == std::vector<double>{0.01, 1e6});
  CHECK(parse_real_list("").empty());
  CHECK(parse_int_list("-2,3") == std::vector<int>{-2, 3});
  CHECK_THROWS_AS(parse_real_list("1,,2"), PreconditionError);
  CHECK_THROWS_AS(parse_int_list("1.5"), PreconditionError);
}

TEST_CASE("metrics rows parse back losslessly") {
  MetricsRow r;
  r.step = 40;
  r.v_d = -1.3862943611198906;
  r.v_g = 0.1 + 0.2;
  r.dg_plain = 1e-300;
  r.dg_lambda = -0.0;
  r.hist_jsd = std::log(2.0);
  r.wallclock_ms = 12.5;
  const auto back = parse_metrics_row(format_metrics_row(r));
  CHECK(back.step == 40);
  CHECK(*back.v_d == *r.v_d);
  CHECK(*back.v_g == *r.v_g);
  CHECK(*back.dg_plain == *r.dg_plain);
  CHECK(*back.hist_jsd == *r.hist_jsd);
  CHECK(back.complete());

  MetricsRow f;
  f.step = 7;
  CHECK(format_metrics_row(f) == "7,failed,failed,failed,failed,failed,0");
  CHECK_FALSE(parse_metrics_row("7,failed,failed,failed,failed,failed,0").complete());
  CHECK_THROWS_AS(parse_metrics_row("1,2,3"), PreconditionError);
  CHECK_THROWS_AS(parse_metrics_row("1,x,0,0,0,0,0"), PreconditionError);
}

TEST_CASE("pearson") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(-1.0));
  CHECK(pearson({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), PreconditionError);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), PreconditionError);
}

TEST_CASE("correlate excludes and counts failed rows") {
  std::vector<MetricsRow> rows;
  for (int i = 0; i < 4; ++i) {
    MetricsRow r;
    r.step = i;
    r.v_d = r.v_g = 0;
    r.dg_lambda = i;
    r.dg_plain = -i;
    r.hist_jsd = 2 * i;
    rows.push_back(r);
  }
  rows.push_back(MetricsRow{});
  const auto c = correlate(rows);
  CHECK(c.valid_rows == 4);
  CHECK(c.excluded_rows == 1);
  CHECK(c.r_lambda == doctest::Approx(1.0));
  CHECK(c.r_plain == doctest::Approx(-1.0));
  rows.erase(rows.begin(), rows.begin() + 2);
  CHECK_THROWS_AS(correlate(rows), PreconditionError);
}

TEST_CASE("checkpoint files round trip") {
  const auto dir = scratch("ckpt");
  fs::create_directories(dir);
  const auto cfg = tiny();
  auto st = initial_state(cfg);
  st.step = 17;
  st.d_opt.t = 4;
  st.d_opt.m = Eigen::VectorXd::LinSpaced(st.gan.theta_d.size(), -1, 1);
  st.d_opt.v = st.d_opt.m.cwiseAbs2();
  st.rng.normal();
  const auto path = (dir / "x.pxgc").string();
  save_checkpoint(path, st, cfg);

  const auto back = load_checkpoint(path);
  CHECK(back.state.step == 17);
  CHECK(back.state.gan.theta_d.values() == st.gan.theta_d.values());
  CHECK(back.state.gan.theta_g.values() == st.gan.theta_g.values());
  CHECK(back.state.d_opt.m == st.d_opt.m);
  CHECK(back.state.d_opt.v == st.d_opt.v);
  CHECK(back.state.d_opt.t == 4);
  CHECK(back.state.g_opt.lr == cfg.train.lr_g);
  CHECK(config_entries(back.config) == config_entries(cfg));
  auto a = st.rng, b = back.state.rng;
  CHECK(a.next_u64() == b.next_u64());

  const auto side = nlohmann::json::parse(slurp(path + ".json"));
  CHECK(side["format"] == "PXGC");
  CHECK(side["step"] == 17);
  CHECK(side["config"]["seed"] == "5");

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), PreconditionError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.pxgc").string()), PreconditionError);
  fs::remove_all(dir);
}

TEST_CASE("train writes one row per checkpoint and never overwrites a run") {
  const auto dir = scratch("train");
  const auto cfg = tiny();
  const auto r = train(cfg, dir.string());
  CHECK_FALSE(r.failed);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].step == 0);
  CHECK(r.rows[2].step == 10);
  for (const auto& row : r.rows) {
    CHECK(row.complete());
    CHECK(*row.hist_jsd >= 0);
    CHECK(*row.hist_jsd <= std::log(2.0) + 1e-12);
  }
  CHECK(*r.rows[0].v_d == *r.rows[0].v_g);

  const auto text = lines(slurp(dir / "metrics.csv"));
  REQUIRE(text.size() == 4);
  CHECK(text[0] == kMetricsHeader);
  const auto parsed = read_metrics((dir / "metrics.csv").string());
  CHECK(*parsed[1].dg_lambda == *r.rows[1].dg_lambda);

  CHECK(fs::exists(dir / "checkpoints" / "step_0000005.pxgc"));
  CHECK(fs::exists(dir / "checkpoints" / "step_0000010.pxgc.json"));
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["status"] == "completed");
  CHECK(report["epoch_mapping"]["worst_iters"] == 3);
  CHECK(report["versions"]["metrics_schema"] == kMetricsSchemaVersion);
  CHECK(report["config"]["train.steps"] == "10");
  CHECK(report["summary"]["checkpoints"] == 3);

  CHECK_THROWS_AS(train(cfg, dir.string()), PreconditionError);
  fs::remove_all(dir);
}

TEST_CASE("update ratio semantics") {
  for (auto [ratio, d_updates, g_updates] : {std::tuple{3, 30, 10}, {-2, 10, 20}, {1, 10, 10}}) {
    const auto dir = scratch("ratio");
    train(tiny("train.ratio = " + std::to_string(ratio) + "\n"), dir.string());
    const auto ck = load_checkpoint((dir / "checkpoints" / "step_0000010.pxgc").string());
    CHECK(ck.state.d_opt.t == static_cast<std::uint64_t>(d_updates));
    CHECK(ck.state.g_opt.t == static_cast<std::uint64_t>(g_updates));
    fs::remove_all(dir);
  }
}

TEST_CASE("zero steps leave only the initial checkpoint") {
  const auto dir = scratch("zero");
  const auto r = train(tiny("train.steps = 0\ntrain.checkpoint_every = 0\n"), dir.string());
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].step == 0);
  fs::remove_all(dir);
}

TEST_CASE("training is reproducible from config and seed") {
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  train(tiny(), a.string());
  train(tiny(), b.string());
  train(tiny("seed = 6\n"), c.string());
  CHECK(without_wallclock(a / "metrics.csv") == without_wallclock(b / "metrics.csv"));
  CHECK(without_wallclock(a / "metrics.csv") != without_wallclock(c / "metrics.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("a diverging run is marked failed and keeps earlier checkpoints") {
  const auto dir = scratch("fail");
  const auto r = train(tiny("train.lr_g = 1e308\n"), dir.string());
  CHECK(r.failed);
  REQUIRE(r.rows.size() >= 2);
  CHECK(r.rows.front().complete());
  CHECK_FALSE(r.rows.back().complete());
  CHECK(r.rows.back().step == r.failed_step);
  CHECK(fs::exists(dir / "checkpoints" / "step_0000000.pxgc"));
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["status"] == "failed");
  CHECK(lines(slurp(dir / "metrics.csv")).back().find("failed") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint commands") {
  const auto run = scratch("cmd_run"), out = scratch("cmd_out");
  const auto r = train(tiny(), run.string());
  const auto ck = (run / "checkpoints" / "step_0000005.pxgc").string();

  const auto gap = gap_cmd(ck, out.string());
  CHECK(gap.dg_lambda == *r.rows[1].dg_lambda);
  CHECK(gap.dg_plain == *r.rows[1].dg_plain);
  CHECK(lines(slurp(out / "gap.csv")).size() == 2);

  const auto sweep = lambda_sweep_cmd(ck, {1e6, 0.01, 0.1}, out.string());
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].lambda == 0.01);
  CHECK(sweep[2].lambda == 1e6);
  CHECK(sweep[1].report.dg_lambda == gap.dg_lambda);
  const auto csv = lines(slurp(out / "lambda_sweep.csv"));
  REQUIRE(csv.size() == 4);
  CHECK(csv[1].rfind("0.01,", 0) == 0);
  CHECK_THROWS_AS(lambda_sweep_cmd(ck, {}, out.string()), PreconditionError);
  CHECK(default_lambdas().front() == 1e-2);
  CHECK(default_lambdas().back() == 1e6);

  auto zero = tiny("probe.steps = 0\n");
  probe_cmd(ck, ProbeKind::deviation, out.string(), &zero);
  CHECK(lines(slurp(out / "deviation.csv")).size() == 2);
  probe_cmd(ck, ProbeKind::deviation, out.string());
  CHECK(lines(slurp(out / "deviation.csv")).size() == 4);

  probe_cmd(ck, ProbeKind::spectrum, out.string());
  const auto spec = nlohmann::json::parse(slurp(out / "spectrum.json"));
  CHECK(spec["eigenvalues"].size() == 2);
  CHECK(spec["nash_consistent"].is_boolean());
  CHECK(spec["agent"] == "generator");

  CHECK_THROWS_AS(parse_probe_kind("curvature"), PreconditionError);
  CHECK(parse_probe_kind("spectrum") == ProbeKind::spectrum);
  fs::remove_all(run);
  fs::remove_all(out);
}

TEST_CASE("ratio sweep") {
  const auto ratios = default_ratios();
  CHECK(ratios.size() == 20);
  CHECK(std::find(ratios.begin(), ratios.end(), 0) == ratios.end());
  const auto a = scratch("rs_a"), b = scratch("rs_b");
  const auto base = tiny("train.steps = 4\ntrain.checkpoint_every = 4\n");
  CHECK_THROWS_AS(ratio_sweep_cmd(base, {1, 0}, a.string()), PreconditionError);
  fs::remove_all(a);
  const auto rows = ratio_sweep_cmd(base, {2, -1}, a.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ratio == -1);
  CHECK(rows[1].ratio == 2);
  CHECK(fs::exists(a / "N_-1" / "metrics.csv"));
  ratio_sweep_cmd(base, {-1, 2}, b.string());
  CHECK(slurp(a / "ratio_sweep.csv") == slurp(b / "ratio_sweep.csv"));
  CHECK(lines(slurp(a / "ratio_sweep.csv"))[0] == "N,final_dg_lambda,final_hist_jsd");

  // A single N reproduces the plain training run's final metrics.
  const auto single = scratch("rs_single"), solo = scratch("rs_solo");
  const auto one = ratio_sweep_cmd(base, {2}, single.string());
  auto cfg = base;
  cfg.train.ratio = 2;
  const auto run = train(cfg, solo.string());
  CHECK(*one[0].final_dg_lambda == *run.rows.back().dg_lambda);
  CHECK(*one[0].final_hist_jsd == *run.rows.back().hist_jsd);
  for (const auto& d : {a, b, single, solo}) fs::remove_all(d);
}
