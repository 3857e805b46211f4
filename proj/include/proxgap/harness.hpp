#pragma once

#include "proxgap/checkpoint.hpp"
#include "proxgap/config.hpp"
#include "proxgap/gapmetrics.hpp"
#include "proxgap/probes.hpp"

#include <optional>
#include <string>
#include <vector>

namespace proxgap {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kMetricsHeader = "step,v_d,v_g,dg_plain,dg_lambda,hist_jsd,wallclock_ms";
inline constexpr const char* kVersion = "1.0.0";

/// One checkpoint. An empty optional is written as "failed".
struct MetricsRow {
  int step = 0;
  /// Mean V over the discriminator updates since the previous checkpoint;
  /// V on the evaluation batch at step 0.
  std::optional<double> v_d;
  /// Same for the generator updates.
  std::optional<double> v_g;
  std::optional<double> dg_plain;
  std::optional<double> dg_lambda;
  std::optional<double> hist_jsd;
  double wallclock_ms = 0;

  bool complete() const { return v_d && v_g && dg_plain && dg_lambda && hist_jsd; }
};

/// "%.17g", so every cell parses back to the same double.
std::string format_real(double x);
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);
std::vector<MetricsRow> read_metrics(const std::string& path);

// Stream ids under Rng(seed).fork: data 10, initialization 11, training
// minibatches 12, gap estimators 13, histogram latent codes 14, probes 15.

TrainingState initial_state(const ExperimentConfig& cfg);

/// Histogram JSD between generated rows and the evaluation split, on the
/// evaluation extent widened by 1 and a fixed latent batch.
double generator_hist_jsd(const GanState& gan, const DataSplits& splits,
                          const ExperimentConfig& cfg);

struct TrainResult {
  std::string run_dir;
  bool failed = false;
  int failed_step = -1;
  std::string failure;
  std::vector<MetricsRow> rows;
};

/// Creates `run_dir` (which must not exist) and writes metrics.csv,
/// report.json and checkpoints/step_<n>.pxgc (+ .json) at every checkpoint.
TrainResult train(const ExperimentConfig& cfg, const std::string& run_dir);

/// duality_gap at a checkpoint with the run's gap stream; gap.csv.
GapReport gap_cmd(const std::string& checkpoint, const std::string& out_dir,
                  const ExperimentConfig* override_cfg = nullptr);

/// From 1e-2 to 1e6, one point per decade.
std::vector<double> default_lambdas();

/// lambda_sweep.csv, ascending in λ. An empty list is a usage error.
std::vector<SweepPoint> lambda_sweep_cmd(const std::string& checkpoint,
                                         const std::vector<double>& lambdas,
                                         const std::string& out_dir,
                                         const ExperimentConfig* override_cfg = nullptr);

/// -10..10 without 0.
std::vector<int> default_ratios();

struct RatioRow {
  int ratio = 0;
  std::optional<double> final_dg_lambda;
  std::optional<double> final_hist_jsd;
};

/// One independent run per N under out_dir/N_<n>, all with the base seed;
/// ratio_sweep.csv sorted by N. A failed run yields "failed" cells.
std::vector<RatioRow> ratio_sweep_cmd(const ExperimentConfig& base, std::vector<int> ratios,
                                      const std::string& out_dir);

/// Pearson r; throws on fewer than 3 points or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct Correlation {
  double r_lambda = 0;
  double r_plain = 0;
  int valid_rows = 0;
  int excluded_rows = 0;
};

/// r between each gap series and hist_jsd over the complete rows.
Correlation correlate(const std::vector<MetricsRow>& rows);
Correlation correlate_file(const std::string& metrics_csv);
/// out_dir/correlation.json.
void write_correlation(const Correlation& c, const std::string& out_dir);

enum class ProbeKind { deviation, spectrum };
ProbeKind parse_probe_kind(const std::string& name);

/// deviation.csv (step,v,hist_jsd) or spectrum.json. Deviation with
/// probe.steps = 0 records only the initial point.
void probe_cmd(const std::string& checkpoint, ProbeKind kind, const std::string& out_dir,
               const ExperimentConfig* override_cfg = nullptr);

}  // namespace proxgap
