#include "proxgap/error.hpp"
#include "proxgap/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace proxgap;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string lambdas;
  std::string ratios;
  std::optional<int> k;
  std::string kind = "deviation";
  std::string metrics;
};

std::optional<ExperimentConfig> explicit_config(const Flags& f) {
  if (f.config.empty() && !f.seed && !f.k) return std::nullopt;
  ExperimentConfig cfg = f.config.empty() ? default_config() : load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.k) cfg.probe.k = *f.k;
  cfg.validate();
  return cfg;
}

ExperimentConfig run_config(const Flags& f) {
  return explicit_config(f).value_or(default_config());
}

/// A checkpoint's own configuration unless --config, --seed or --k is given.
std::optional<ExperimentConfig> checkpoint_override(const Flags& f) {
  if (!f.config.empty()) return explicit_config(f);
  if (!f.seed && !f.k) return std::nullopt;
  ExperimentConfig cfg = load_checkpoint(f.checkpoint).config;
  if (f.seed) cfg.seed = *f.seed;
  if (f.k) cfg.probe.k = *f.k;
  cfg.validate();
  return cfg;
}

void require_flag(const std::string& value, const char* flag) {
  require(!value.empty(), std::string("missing required flag ") + flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximal duality gap experiments on synthetic GANs"};
  app.require_subcommand(1);
  Flags f;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Key = value configuration file");
    sub->add_option("--seed", f.seed, "Seed overriding the configuration");
    sub->add_option("--out", f.out, "Output directory");
  };

  auto* train_cmd = app.add_subcommand("train", "Alternating training with periodic gap logging");
  add_common(train_cmd);

  auto* gap = app.add_subcommand("gap", "Duality gaps at a checkpoint");
  add_common(gap);
  gap->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();

  auto* sweep = app.add_subcommand("lambda-sweep", "Proximal gap over a list of lambdas");
  add_common(sweep);
  sweep->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
  sweep->add_option("--lambda", f.lambdas, "Comma-separated lambdas (default 1e-2..1e6)");

  auto* ratio = app.add_subcommand("ratio-sweep", "One training run per update ratio N");
  add_common(ratio);
  ratio->add_option("--ratios", f.ratios, "Comma-separated nonzero N (default -10..10)");

  auto* corr = app.add_subcommand("correlate", "Pearson r between gap and histogram JSD series");
  add_common(corr);
  corr->add_option("metrics", f.metrics, "metrics.csv of a run")->required();

  auto* probe = app.add_subcommand("probe", "Unilateral deviation or Hessian spectrum");
  add_common(probe);
  probe->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
  probe->add_option("--kind", f.kind, "deviation or spectrum");
  probe->add_option("--k", f.k, "Number of eigenvalues");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      require_flag(f.out, "--out");
      const auto r = train(run_config(f), f.out);
      std::printf("%s: %zu checkpoints, status %s\n", r.run_dir.c_str(), r.rows.size(),
                  r.failed ? "failed" : "completed");
      if (r.failed) std::fprintf(stderr, "failed at step %d: %s\n", r.failed_step, r.failure.c_str());
      return r.failed ? 3 : 0;
    }
    if (gap->parsed()) {
      require_flag(f.out, "--out");
      const auto o = checkpoint_override(f);
      const auto r = gap_cmd(f.checkpoint, f.out, o ? &*o : nullptr);
      std::printf("dg_plain %.17g\ndg_lambda %.17g\n", r.dg_plain, r.dg_lambda);
      return 0;
    }
    if (sweep->parsed()) {
      require_flag(f.out, "--out");
      const auto lambdas = sweep->count("--lambda") ? parse_real_list(f.lambdas) : default_lambdas();
      const auto o = checkpoint_override(f);
      for (const auto& p : lambda_sweep_cmd(f.checkpoint, lambdas, f.out, o ? &*o : nullptr))
        std::printf("%.17g %.17g\n", p.lambda, p.report.dg_lambda);
      return 0;
    }
    if (ratio->parsed()) {
      require_flag(f.out, "--out");
      const auto ratios = ratio->count("--ratios") ? parse_int_list(f.ratios) : default_ratios();
      for (const auto& r : ratio_sweep_cmd(run_config(f), ratios, f.out))
        std::printf("%d %s %s\n", r.ratio, r.final_dg_lambda ? format_real(*r.final_dg_lambda).c_str() : "failed",
                    r.final_hist_jsd ? format_real(*r.final_hist_jsd).c_str() : "failed");
      return 0;
    }
    if (corr->parsed()) {
      const auto c = correlate_file(f.metrics);
      if (!f.out.empty()) write_correlation(c, f.out);
      std::printf("r_dg_lambda %.17g\nr_dg_plain %.17g\nvalid_rows %d\nexcluded_rows %d\n", c.r_lambda,
                  c.r_plain, c.valid_rows, c.excluded_rows);
      return 0;
    }
    if (probe->parsed()) {
      require_flag(f.out, "--out");
      const ProbeKind kind = parse_probe_kind(f.kind);
      const auto o = checkpoint_override(f);
      probe_cmd(f.checkpoint, kind, f.out, o ? &*o : nullptr);
      return 0;
    }
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
