// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvx/filtering.hpp"
#include "mvx/model.hpp"
#include "mvx/sde.hpp"

namespace mvx {

/// delta = epsilon * (-ln epsilon)^(1/3) for 0 < epsilon < 1.
double delta_schedule(double epsilon);

/// The three terms of the averaging error envelope at (epsilon, delta):
/// delta^2 + delta, (delta^2 + delta^3) exp(delta/epsilon) / epsilon, epsilon / delta.
struct EnvelopeTerms {
  double segment = 0.0;
  double freezing = 0.0;
  double ergodic = 0.0;
};

EnvelopeTerms envelope_terms(double epsilon, double delta);

struct SweepConfig {
  std::vector<double> eps_grid{0.1, 0.05, 0.02, 0.01};
  std::size_t mc_reps = 8;
  std::vector<double> p_orders{1.0, 2.0};
  SdeConfig sde;  // epsilon and delta_eps are overridden per grid point
  FilterConfig filter;
  FrozenRunConfig frozen;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Throws ValidationError on a grid that is not strictly decreasing in
/// (0, 1), mc_reps < 4, or p_orders with entries <= 0.
void validate(const SweepConfig& cfg);

/// Repetition r at a grid point runs with seed sde.seed + r.
std::uint64_t rep_seed(const SweepConfig& cfg, std::size_t rep);

struct SweepRow {
  double eps = 0.0;
  double delta_eps = 0.0;
  double p = 1.0;
  double mean_error = 0.0;
  double std_error = 0.0;  // across repetitions
  std::size_t reps = 0;
  std::size_t substeps = 0;
  EnvelopeTerms envelope;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

struct SweepReport {
  std::string kind;  // "averaging" or "filter"
  std::vector<SweepRow> rows;  // grid-major, then p_orders
  std::vector<double> fit_p;
  std::vector<RateFit> fits;  // aligned with fit_p; present when >= 3 grid points
  std::vector<double> runtime_seconds;  // per grid point
  std::string config_digest;
};

/// Per repetition: coupled slow-fast and averaged ensembles sharing slow
/// noise; statistic is the mean over particles of max_t |X - Xbar|^(2p).
SweepReport averaging_error_sweep(const ModelSpec& model, const AveragedDrift& drift,
                                  const SweepConfig& cfg);

/// Per repetition: one observation path from particle 0 of the multiscale
/// signal, both filters on it, statistic is the time average of
/// |pi_eps(F) - pi_0(F)|^p.
SweepReport filter_error_sweep(const ModelSpec& model, const AveragedDrift& drift,
                               const SweepConfig& cfg);

/// Least squares of log(mean) on log(eps). Throws DegenerateFit on fewer
/// than two points, a non-positive mean, or a constant eps.
RateFit rate_fit(std::span<const double> eps, std::span<const double> means);
/// Fit over the rows of one moment order.
RateFit rate_fit(const SweepReport& report, double p);

/// eps,delta_eps,p,mean_error,std_error,reps
void write_sweep_csv(std::ostream& os, const SweepReport& report);

/// Canonical text form of a sweep config used for digests.
std::string canonical_text(const SweepConfig& cfg);

}  // namespace mvx
