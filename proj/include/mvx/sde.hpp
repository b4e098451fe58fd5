// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvx/measure.hpp"
#include "mvx/model.hpp"
#include "mvx/rng.hpp"

namespace mvx {

/// Bound on gamma_est * (dt_macro / micro_substeps) / epsilon.
inline constexpr double kFastStepCap = 0.25;

struct SdeConfig {
  double epsilon = 0.05;
  double T = 1.0;
  double dt_macro = 0.01;
  std::size_t micro_substeps = 0;  // 0 selects the smallest stable count
  std::size_t N = 1000;
  std::uint64_t seed = 1;
  std::optional<double> delta_eps;

  friend bool operator==(const SdeConfig&, const SdeConfig&) = default;
};

/// Number of macro steps T / dt_macro; throws ValidationError when the grid
/// is not an integer multiple or other config invariants fail.
std::size_t macro_steps(const SdeConfig& cfg);

/// Smallest substep count meeting the fast-step stability cap.
std::size_t stable_substeps(const ModelSpec& model, double dt_macro, double epsilon);

/// Effective substep count for cfg. Throws ValidationError naming the
/// suggested micro_substeps when an explicit count is unstable.
std::size_t resolve_substeps(const ModelSpec& model, const SdeConfig& cfg);

/// Settings for a run of the frozen fast equation at unit time scale.
struct FrozenRunConfig {
  std::size_t M = 2000;
  double dt = 0.01;
  std::optional<double> burn_in;  // default 5 / (beta1 - beta2)
  double avg_window = 5.0;
  std::uint64_t seed = 7;

  friend bool operator==(const FrozenRunConfig&, const FrozenRunConfig&) = default;
};

struct NoiseTag {
  std::uint64_t seed = 0;
  std::string slow_label;
  std::string fast_label;
  std::size_t substeps = 0;

  friend bool operator==(const NoiseTag&, const NoiseTag&) = default;
};

/// Clouds on the macro grid. Fast and auxiliary clouds are empty when the
/// run does not produce them.
struct PathEnsemble {
  std::vector<double> times;
  std::vector<ParticleCloud> slow;
  std::vector<ParticleCloud> fast;
  std::vector<ParticleCloud> aux;
  NoiseTag noise;

  std::size_t particles() const noexcept {
    if (!slow.empty()) return slow.front().size();
    return fast.empty() ? 0 : fast.front().size();
  }

  friend bool operator==(const PathEnsemble&, const PathEnsemble&) = default;
};

/// Averaged slow drift b̄1(x, mu). prepare() is called once per macro step
/// with every query point before concurrent calls to eval().
class AveragedDrift {
 public:
  virtual ~AveragedDrift() = default;
  virtual void prepare(std::span<const double> xs, std::size_t dim, const MeasureSummary& mu) const {
    (void)xs;
    (void)dim;
    (void)mu;
  }
  virtual void eval(std::span<const double> x, const MeasureSummary& mu,
                    std::span<double> out) const = 0;
};

/// Noise and step sizes shared by every particle in one run.
struct StepPlan {
  double epsilon = 1.0;
  double dt = 0.01;
  std::size_t substeps = 1;
  NoiseSource slow_noise;
  NoiseSource fast_noise;
};

/// One macro step of the slow-fast system for particles [begin, end).
/// The fast component takes plan.substeps Euler steps with (x, mu, nu)
/// frozen; the slow drift is the mean of b1 along those substeps.
/// xs/zs are row-major particle arrays. particle_offset shifts noise indices.
void step_slow_fast(const ModelSpec& model, const MeasureSummary& mu, const MeasureSummary& nu,
                    const StepPlan& plan, std::uint32_t step, std::size_t begin, std::size_t end,
                    std::span<double> xs, std::span<double> zs);

/// One macro step of the averaged equation for particles [begin, end).
void step_averaged(const ModelSpec& model, const AveragedDrift& drift, const MeasureSummary& mu,
                   const StepPlan& plan, std::uint32_t step, std::size_t begin, std::size_t end,
                   std::span<double> xs);

/// Throws Instability naming the first non-finite coordinate.
void check_finite(std::span<const double> values, std::size_t dim, std::size_t step,
                  const char* what);

PathEnsemble simulate_slow_fast(const ModelSpec& model, const SdeConfig& cfg);

using SignalObserver = std::function<void(std::size_t step, std::span<const double> xs,
                                          std::span<const double> zs)>;

/// Streaming form of simulate_slow_fast: observer(step, xs, zs) sees the
/// row-major ensemble at every macro grid point, starting with step 0.
/// Returns the resolved substep count.
std::size_t run_slow_fast(const ModelSpec& model, const SdeConfig& cfg,
                          const SignalObserver& observer);

PathEnsemble simulate_averaged(const ModelSpec& model, const AveragedDrift& drift,
                               const SdeConfig& cfg);

/// Slow-fast and averaged ensembles driven by the same slow Brownian
/// increments per particle index.
std::pair<PathEnsemble, PathEnsemble> coupled_pair(const ModelSpec& model,
                                                   const AveragedDrift& drift,
                                                   const SdeConfig& cfg);

/// Frozen fast equation dZ = b2(x, mu, Z, nu_M) dt + sigma2(...) dW started at z0
/// (model.z0 when empty). Records every step up to burn_in + avg_window.
PathEnsemble simulate_frozen(const ModelSpec& model, std::span<const double> x,
                             const MeasureSummary& mu, const FrozenRunConfig& cfg,
                             std::span<const double> z0 = {});

using FrozenObserver =
    std::function<void(std::size_t step, double time, std::span<const double> zs)>;

/// Streaming form of simulate_frozen: observer(step, time, zs) is called at
/// t = 0 and after each of `steps` steps. zs is row-major M x m.
void run_frozen(const ModelSpec& model, std::span<const double> x, const MeasureSummary& mu,
                std::size_t particles, double dt, std::size_t steps, const NoiseSource& noise,
                std::span<const double> z0, const FrozenObserver& observer);

/// Khasminskii auxiliary process: on each segment [k delta, (k+1) delta) the
/// fast dynamics run with slow inputs frozen at the segment start, restarted
/// from Z there, using the same fast noise as slow_path. Returns slow_path
/// with aux clouds filled.
PathEnsemble simulate_auxiliary(const ModelSpec& model, const PathEnsemble& slow_path,
                                const SdeConfig& cfg);

/// Macro-step indices where auxiliary segments start.
std::vector<std::size_t> segment_starts(const SdeConfig& cfg);

/// Columns: time,particle,x0..,z0..,zhat0..
void write_path_csv(std::ostream& os, const PathEnsemble& path);

/// Little-endian snapshot: "MVXPATH\0", u32 version, u32 flags (1 fast,
/// 2 aux), u64 n, u64 m, u64 times, u64 particles, f64 times[], then the
/// slow, fast and aux coordinates for each time in particle-major order.
std::string encode_path_binary(const PathEnsemble& path);
PathEnsemble decode_path_binary(std::string_view bytes);

MeasureSummary summarize_rows(std::span<const double> rows, std::size_t dim);

}  // namespace mvx
