#pragma once

#include "proxgap/config.hpp"
#include "proxgap/objectives.hpp"
#include "proxgap/optim.hpp"
#include "proxgap/rng.hpp"

#include <cstdint>
#include <string>

namespace proxgap {

/// Everything needed to resume training at a cycle boundary.
struct TrainingState {
  int step = 0;
  GanState gan;
  AdamState<double> d_opt;
  AdamState<double> g_opt;
  Rng rng;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers and IEEE-754 doubles little-endian:
///
///   "PXGC"                 4 bytes
///   version                u32
///   step                   u64
///   rng seed               u64
///   theta_d                u64 n, then n f64
///   theta_g                u64 n, then n f64
///   adam (d then g)        u64 t; f64 lr, beta1, beta2, eps; u64 n; n f64 m; n f64 v
///   rng engine state       u64 byte count, then that many ASCII bytes
///
/// The sidecar `<path>.json` repeats the scalar fields, names the network
/// architectures, and carries the full configuration echo.
void save_checkpoint(const std::string& path, const TrainingState& state,
                     const ExperimentConfig& cfg);

struct LoadedCheckpoint {
  TrainingState state;
  ExperimentConfig config;
};

/// Reads the binary file and its sidecar. The configuration comes from the
/// sidecar unless `override_cfg` is given; either way the parameter counts
/// must match the architectures it describes.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const ExperimentConfig* override_cfg = nullptr);

}  // namespace proxgap
