// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mvx/measure.hpp"
#include "mvx/model.hpp"
#include "mvx/sde.hpp"

namespace mvx {

struct BbarEstimate {
  Vec drift;
  Vec std_error;  // autocorrelation-corrected standard error per coordinate
};

/// Ensemble-and-time average of b1(x, mu, Z) over the frozen run's
/// averaging window [burn_in, burn_in + avg_window].
BbarEstimate estimate_bbar(const ModelSpec& model, std::span<const double> x,
                           const MeasureSummary& mu, const FrozenRunConfig& cfg);

/// a11 x + a12 mu_mean + a13 (c1 x + c2 mu_mean) / (gamma - c3).
Vec analytic_bbar_linear(const LinearModelParams& params, std::span<const double> x,
                         std::span<const double> mu_mean);

struct InvariantMoments {
  Vec mean;
  double second_moment = 0.0;
  Vec mean_std_error;
  double second_moment_std_error = 0.0;
};

InvariantMoments invariant_moments(const ModelSpec& model, std::span<const double> x,
                                   const MeasureSummary& mu, const FrozenRunConfig& cfg);

struct ErgodicDecayProfile {
  std::vector<double> t_grid;
  std::vector<double> deviations;   // |mean_i b1(x, mu, Z_i(t)) - b̄1|
  std::vector<double> noise_floor;  // Monte Carlo standard error of each deviation
  double reference_bbar_se = 0.0;
  double fitted_rate = 0.0;
  double fit_intercept = 0.0;
  double fit_r2 = 0.0;
  std::size_t fit_points = 0;
};

/// Deviations only; no fit. cfg supplies dt and the seed, and configures
/// the long reference run for b̄1.
ErgodicDecayProfile decay_deviations(const ModelSpec& model, std::span<const double> x,
                                     const MeasureSummary& mu, std::span<const double> z0,
                                     std::span<const double> t_grid, std::size_t replications,
                                     const FrozenRunConfig& cfg);

/// Fits log(deviation) = a - rate t over the leading points that stay above
/// three noise floors. Throws FitFailure when fewer than three qualify.
void fit_decay(ErgodicDecayProfile& profile);

ErgodicDecayProfile ergodic_decay_profile(const ModelSpec& model, std::span<const double> x,
                                          const MeasureSummary& mu, std::span<const double> z0,
                                          std::span<const double> t_grid,
                                          std::size_t replications, const FrozenRunConfig& cfg);

enum class OracleMode { Estimated, AnalyticLinear, User };

const char* oracle_mode_name(OracleMode mode);

using UserDrift =
    std::function<void(std::span<const double> x, const MeasureSummary& mu, std::span<double> out)>;

/// b̄1 provider for the averaged equation. In estimated mode, queries are
/// rounded to the nearest cell of a grid over (x, mean(mu), ||mu||^2) and
/// each cell runs one frozen simulation, seeded from the cell key so the
/// cached values do not depend on query order.
class AveragedDriftOracle final : public AveragedDrift {
 public:
  using Key = std::vector<std::int64_t>;

  struct CacheEntry {
    Key key;
    Vec drift;
    Vec std_error;
  };

  AveragedDriftOracle(ModelSpec model, OracleMode mode, FrozenRunConfig frozen_cfg,
                      double quantization, UserDrift user = {});

  void prepare(std::span<const double> xs, std::size_t dim, const MeasureSummary& mu) const override;
  void eval(std::span<const double> x, const MeasureSummary& mu,
            std::span<double> out) const override;

  OracleMode mode() const noexcept { return mode_; }
  double quantization() const noexcept { return quantization_; }
  const FrozenRunConfig& frozen_config() const noexcept { return frozen_cfg_; }

  Key key_for(std::span<const double> x, const MeasureSummary& mu) const;
  std::size_t cache_size() const;
  std::size_t frozen_runs() const;
  std::vector<CacheEntry> cache_entries() const;

  std::string frozen_config_digest() const;

  /// Versioned text table: schema line, then one row per cell with the key,
  /// drift, standard error and frozen config digest.
  void save_cache(std::ostream& os) const;
  /// Loads rows whose digest matches this oracle; returns the number loaded.
  std::size_t load_cache(std::istream& is);

 private:
  struct State;
  const CacheEntry& lookup_or_compute(const Key& key) const;
  CacheEntry compute(const Key& key) const;

  ModelSpec model_;
  OracleMode mode_;
  FrozenRunConfig frozen_cfg_;
  double quantization_;
  UserDrift user_;
  std::shared_ptr<State> state_;
};

AveragedDriftOracle make_drift_oracle(const ModelSpec& model, OracleMode mode,
                                      const FrozenRunConfig& frozen_cfg, double quantization,
                                      UserDrift user = {});

}  // namespace mvx
