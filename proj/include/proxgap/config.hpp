#pragma once

#include "proxgap/distributions.hpp"
#include "proxgap/gapmetrics.hpp"
#include "proxgap/network.hpp"
#include "proxgap/objectives.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace proxgap {

struct DataConfig {
  /// "gmm": modes evenly spaced on the first axis over [-radius, radius];
  /// "ring": modes evenly spaced on a circle of that radius.
  std::string kind = "gmm";
  int modes = 2;
  double radius = 1.5;
  double sigma = 0.3;
};

struct SplitSizes {
  Eigen::Index train = 5000;
  Eigen::Index search = 5000;
  Eigen::Index evaluation = 5000;
};

struct TrainConfig {
  /// Alternating cycles; one cycle is the |ratio| updates of one player plus
  /// one update of the other.
  int steps = 2000;
  /// Discriminator updates per generator update; negative means |ratio|
  /// generator updates per discriminator update.
  int ratio = 1;
  Eigen::Index batch_size = 64;
  double lr_d = 1e-4;
  double lr_g = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  /// 0 selects 2% of `steps`.
  int checkpoint_every = 0;
};

struct GapSchedule {
  ProximalConfig prox;
  /// Passes over the search split per worst-case search; converted to
  /// prox.worst_iters unless worst_iters_override > 0.
  double worst_epochs = 10.0;
  int worst_iters_override = 0;
};

struct MetricsConfig {
  int bins = 32;
  /// Generated rows for the histogram JSD; 0 means the evaluation split size.
  Eigen::Index samples = 0;
};

struct ProbeConfig {
  int steps = 100;
  double lr = 1e-3;
  int eval_every = 10;
  int k = 5;
  std::string agent = "generator";
  int max_iters = 300;
  Eigen::Index batch_rows = 2048;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  SplitSizes splits;
  Eigen::Index latent_dim = 2;
  std::vector<Eigen::Index> d_hidden{32, 32};
  std::vector<Eigen::Index> g_hidden{32, 32};
  Activation activation{ActivationKind::tanh, 0.2};
  std::string objective = "classic";
  double clip = 0.01;
  TrainConfig train;
  GapSchedule gap;
  MetricsConfig metrics;
  ProbeConfig probe;

  void validate() const;
  int checkpoint_interval() const;
  /// Worst-case iterations after the epoch mapping.
  int worst_iters() const;
  /// Gap settings with worst_iters resolved.
  ProximalConfig proximal() const;
  ObjectiveKind objective_kind() const;
  NetworkSpec d_spec() const;
  NetworkSpec g_spec() const;
  SyntheticDist distribution() const;
};

/// Optimizer defaults per objective: clipped Wasserstein uses
/// (4e-4, 1e-4, 0.5, 0.999); the others use (1e-4, 2e-4, 0, 0.999).
ExperimentConfig default_config(const std::string& objective = "classic");

/// `key = value` lines; '#' starts a comment. Unknown keys are errors.
/// Optimizer defaults follow the objective named in the document.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Every key with its value, in the syntax parse_config reads.
std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);
std::string format_config(const ExperimentConfig& cfg);

/// Comma-separated reals; empty items are errors.
std::vector<double> parse_real_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// The run's data, regenerated from (config, seed).
DataSplits make_experiment_splits(const ExperimentConfig& cfg);

}  // namespace proxgap
