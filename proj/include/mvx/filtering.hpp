// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mvx/measure.hpp"
#include "mvx/model.hpp"
#include "mvx/sde.hpp"

namespace mvx {

/// Unconditional law of the signal on its macro grid, as moment summaries.
/// `fast` is empty for averaged signals.
struct LawTrace {
  std::vector<double> times;
  std::vector<MeasureSummary> slow;
  std::vector<MeasureSummary> fast;
};

LawTrace law_trace(const PathEnsemble& path);

/// Observation increments on a grid that is the signal macro grid or a
/// coarsening of it by `stride`. increments[k] covers (times[k], times[k+1]]
/// and carries h evaluated at the right end point.
struct ObservationPath {
  std::vector<double> times;
  std::vector<Vec> increments;
  double dt = 0.0;
  std::size_t stride = 1;
  std::size_t reference_particle = 0;
  std::uint64_t seed_v = 0;
  LawTrace signal_law_trace;
};

/// dY_k = dV_k + h(X_ref(t_k), mu_N(t_k)) dt with V from an independent stream.
ObservationPath generate_observations(const ModelSpec& model, const PathEnsemble& signal,
                                      std::size_t reference_particle, double dt,
                                      std::uint64_t seed_v);

/// <h, dY> - |h|^2 dt / 2, the log Girsanov weight increment.
double log_likelihood_increment(std::span<const double> h_val, std::span<const double> dY,
                                double dt);

enum class FunctionalKind { One, Identity, Tanh };

const char* functional_name(FunctionalKind kind);
FunctionalKind functional_from_name(std::string_view name);

/// F(x, mu). Tanh: tanh(<c, x>) + tanh(<c, mean(mu)>) with c = (1, ..., 1)/sqrt(n).
double evaluate_functional(FunctionalKind kind, std::span<const double> x,
                           const MeasureSummary& mu);

struct FilterConfig {
  std::size_t Nf = 2000;
  double resample_threshold = 0.5;
  FunctionalKind functional = FunctionalKind::Tanh;
  double p = 1.0;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

void validate(const FilterConfig& cfg);

/// Per observation time. pi_F = rho_F / rho_1 where rho_F and rho_1 are the
/// weighted sums with weights exp(logw - max logw) before any resampling at
/// that time. log_rho1 is the running log of the mean unnormalized weight,
/// carried across resampling.
struct FilterTrajectory {
  std::vector<double> times;
  std::vector<double> pi_F;
  std::vector<double> rho_F;
  std::vector<double> rho_1;
  std::vector<double> log_rho1;
  std::vector<double> ess;
  std::vector<std::size_t> resample_events;
  std::vector<double> pi_F_after_resample;  // aligned with resample_events
};

enum class SignalKind { Multiscale, Averaged };

const char* signal_kind_name(SignalKind kind);

/// Bootstrap particle filter. Propagation and the measure arguments of h and
/// F use the unconditional law trace: obs.signal_law_trace for the
/// multiscale signal, and `averaged_law` (or a fresh averaged run with
/// sde_cfg when absent) for the averaged signal. Filter noise is drawn from
/// the "filter/*" streams of sde_cfg.seed, shared by both kinds.
FilterTrajectory run_filter(SignalKind kind, const ModelSpec& model, const AveragedDrift* drift,
                            const ObservationPath& obs, const FilterConfig& cfg,
                            const SdeConfig& sde_cfg,
                            const std::optional<LawTrace>& averaged_law = std::nullopt);

struct MartingaleResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t runs = 0;
};

/// Monte Carlo mean of exp(-sum h dV - |h|^2 dt / 2) over mc_runs signal
/// particles, with h at the left end of each step.
MartingaleResult martingale_check(const ModelSpec& model, std::size_t mc_runs,
                                  const SdeConfig& sde_cfg, double dt);

struct KalmanSeries {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Exact discrete Kalman filter for dX = a11 X dt + s1 dB observed through
/// dY = hscale X dt + dV, matched to the simulation grid of obs.
KalmanSeries kalman_oracle(const LinearModelParams& params, double x0, const ObservationPath& obs);

/// Fixed point of the Kalman variance recursion for the grid of obs.
double kalman_stationary_variance(const LinearModelParams& params, double obs_dt,
                                  std::size_t stride);

struct FilterDiscrepancy {
  std::vector<double> per_time;  // |pi_a - pi_b|^p
  double terminal = 0.0;
  double average = 0.0;
};

FilterDiscrepancy filter_discrepancy(const FilterTrajectory& a, const FilterTrajectory& b,
                                     double p);

/// time,dY0,... (increments keyed by their right end point)
void write_observations_csv(std::ostream& os, const ObservationPath& obs);
/// time,pi_F,log_rho1,ess
void write_trajectory_csv(std::ostream& os, const FilterTrajectory& traj);

}  // namespace mvx
