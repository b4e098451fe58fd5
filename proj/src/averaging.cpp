// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/averaging.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <sstream>

#include "mvx/error.hpp"
#include "mvx/io.hpp"
#include "mvx/parallel.hpp"

namespace mvx {

namespace {

// Sokal window: sum autocorrelations up to the first lag W >= kWindowFactor * tau
// or the first nonpositive autocovariance, whichever comes first.
constexpr double kWindowFactor = 5.0;

// Standard error of the mean of a stationary, correlated series with
// integrated autocorrelation time tau: sqrt(c0 * tau / (n - tau)). The
// n - tau denominator undoes the bias of the mean-subtracted c0.
double autocorrelated_std_error(std::span<const double> y) {
  const std::size_t n = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (y[i] - mean) * (y[i + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 0.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n; ++lag) {
    const double c = autocov(lag);
    if (c <= 0.0) break;
    tau += 2.0 * c / c0;
    if (static_cast<double>(lag) >= kWindowFactor * tau) break;
  }
  const double nd = static_cast<double>(n);
  tau = std::clamp(tau, 1.0, 0.5 * nd);
  return std::sqrt(c0 * tau / (nd - tau));
}

struct WindowPlan {
  std::size_t burn_steps;
  std::size_t total_steps;
};

WindowPlan plan_window(const ModelSpec& model, const FrozenRunConfig& cfg) {
  if (cfg.M < 2) fail(ErrorCode::ValidationError, "M>=2 violated");
  if (!(cfg.dt > 0.0)) fail(ErrorCode::ValidationError, "frozen dt>0 violated");
  if (!(cfg.avg_window > 0.0)) fail(ErrorCode::ValidationError, "avg_window>0 violated");
  if (cfg.avg_window < 10.0 * cfg.dt)
    fail(ErrorCode::InsufficientWindow, "avg_window must cover at least 10 frozen steps");
  const double burn_in = cfg.burn_in.value_or(default_burn_in(model));
  if (!(burn_in >= 0.0)) fail(ErrorCode::ValidationError, "burn_in>=0 violated");
  const auto burn = static_cast<std::size_t>(std::llround(burn_in / cfg.dt));
  const auto window = static_cast<std::size_t>(std::llround(cfg.avg_window / cfg.dt));
  return {burn, burn + window};
}

// Accumulates per-particle vector samples over the window and reports the
// grand mean. Values are stored as offsets from a reference so a constant
// series reproduces that constant exactly. The standard error is the larger
// of two estimates: the autocorrelation-corrected error of the ensemble-mean
// series, and the spread of per-particle time averages over sqrt(M).
class WindowAverager {
 public:
  explicit WindowAverager(std::size_t dim) : dim_(dim) {}

  bool has_reference() const { return !reference_.empty(); }
  void set_reference(std::span<const double> ref) { reference_.assign(ref.begin(), ref.end()); }
  const Vec& reference() const { return reference_; }

  // rows: particle-major offsets, dim_ per particle.
  void push(std::span<const double> rows) {
    const std::size_t count = rows.size() / dim_;
    if (particle_sums_.empty()) particle_sums_.assign(rows.size(), 0.0);
    Vec mean(dim_, 0.0);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t k = 0; k < dim_; ++k) {
        mean[k] += rows[i * dim_ + k];
        particle_sums_[i * dim_ + k] += rows[i * dim_ + k];
      }
    for (auto& v : mean) v /= static_cast<double>(count);
    samples_.push_back(std::move(mean));
  }

  void finish(Vec& mean, Vec& std_error) const {
    const std::size_t count = samples_.size();
    mean.assign(dim_, 0.0);
    std_error.assign(dim_, 0.0);
    Vec total(dim_, 0.0);
    for (const auto& s : samples_)
      for (std::size_t k = 0; k < dim_; ++k) total[k] += s[k];
    for (std::size_t k = 0; k < dim_; ++k)
      mean[k] = reference_[k] + total[k] / static_cast<double>(count);

    if (count < 2) return;
    const std::size_t particles = particle_sums_.size() / dim_;
    Vec series(count);
    for (std::size_t k = 0; k < dim_; ++k) {
      for (std::size_t i = 0; i < count; ++i) series[i] = samples_[i][k];
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t i = 0; i < particles; ++i) {
        const double a = particle_sums_[i * dim_ + k] / static_cast<double>(count);
        sum += a;
        sum_sq += a * a;
      }
      const double pm = sum / static_cast<double>(particles);
      const double spread = std::max(0.0, sum_sq / static_cast<double>(particles) - pm * pm) /
                            static_cast<double>(particles - 1);
      std_error[k] = std::max(autocorrelated_std_error(series), std::sqrt(spread));
    }
  }

 private:
  std::size_t dim_;
  Vec reference_;
  std::vector<Vec> samples_;
  Vec particle_sums_;
};

// Per-particle offsets b1(x, mu, z_i) - ref; sets ref from the first
// particle when empty.
void push_b1_offsets(const ModelSpec& model, std::span<const double> x, const MeasureSummary& mu,
                     std::span<const double> zs, WindowAverager& acc) {
  const std::size_t n = model.n, m = model.m;
  const std::size_t count = zs.size() / m;
  Vec value(n), rows(count * n);
  if (!acc.has_reference()) {
    model.b1(x, mu, zs.subspan(0, m), value);
    acc.set_reference(value);
  }
  const Vec& ref = acc.reference();
  for (std::size_t i = 0; i < count; ++i) {
    model.b1(x, mu, zs.subspan(i * m, m), value);
    for (std::size_t k = 0; k < n; ++k) rows[i * n + k] = value[k] - ref[k];
  }
  acc.push(rows);
}

}  // namespace

BbarEstimate estimate_bbar(const ModelSpec& model, std::span<const double> x,
                           const MeasureSummary& mu, const FrozenRunConfig& cfg) {
  const WindowPlan plan = plan_window(model, cfg);
  WindowAverager acc(model.n);
  run_frozen(model, x, mu, cfg.M, cfg.dt, plan.total_steps, NoiseSource(cfg.seed, "frozen/W"), {},
             [&](std::size_t step, double, std::span<const double> zs) {
               if (step <= plan.burn_steps) return;
               push_b1_offsets(model, x, mu, zs, acc);
             });
  BbarEstimate out;
  acc.finish(out.drift, out.std_error);
  return out;
}

Vec analytic_bbar_linear(const LinearModelParams& p, std::span<const double> x,
                         std::span<const double> mu_mean) {
  if (!(p.gamma > p.c3)) fail(ErrorCode::InvalidParams, "gamma>c3 violated");
  if (x.size() != mu_mean.size())
    fail(ErrorCode::DimensionMismatch, "analytic_bbar_linear: x and mu_mean differ in size");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = (p.c1 * x[i] + p.c2 * mu_mean[i]) / (p.gamma - p.c3);
    // Same operand order as the linear b1 so a13 = 0 reproduces b1 bit for bit.
    out[i] = p.a11 * x[i] + p.a12 * mu_mean[i] + p.a13 * m;
  }
  return out;
}

InvariantMoments invariant_moments(const ModelSpec& model, std::span<const double> x,
                                   const MeasureSummary& mu, const FrozenRunConfig& cfg) {
  const WindowPlan plan = plan_window(model, cfg);
  const std::size_t m = model.m;
  // Coordinates 0..m-1 hold the mean, coordinate m the second moment.
  WindowAverager acc(m + 1);
  acc.set_reference(Vec(m + 1, 0.0));
  run_frozen(model, x, mu, cfg.M, cfg.dt, plan.total_steps, NoiseSource(cfg.seed, "frozen/W"), {},
             [&](std::size_t step, double, std::span<const double> zs) {
               if (step <= plan.burn_steps) return;
               const std::size_t count = zs.size() / m;
               Vec rows(count * (m + 1));
               for (std::size_t i = 0; i < count; ++i) {
                 double sq = 0.0;
                 for (std::size_t k = 0; k < m; ++k) {
                   rows[i * (m + 1) + k] = zs[i * m + k];
                   sq += zs[i * m + k] * zs[i * m + k];
                 }
                 rows[i * (m + 1) + m] = sq;
               }
               acc.push(rows);
             });
  Vec mean, se;
  acc.finish(mean, se);
  InvariantMoments out;
  out.mean.assign(mean.begin(), mean.begin() + static_cast<std::ptrdiff_t>(m));
  out.mean_std_error.assign(se.begin(), se.begin() + static_cast<std::ptrdiff_t>(m));
  out.second_moment = mean[m];
  out.second_moment_std_error = se[m];
  return out;
}

ErgodicDecayProfile decay_deviations(const ModelSpec& model, std::span<const double> x,
                                     const MeasureSummary& mu, std::span<const double> z0,
                                     std::span<const double> t_grid, std::size_t replications,
                                     const FrozenRunConfig& cfg) {
  if (replications < 100) fail(ErrorCode::ValidationError, "replications>=100 violated");
  if (t_grid.empty()) fail(ErrorCode::ValidationError, "t_grid is empty");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1])))
      fail(ErrorCode::ValidationError, "t_grid must be nonnegative and strictly increasing");
  }
  const std::size_t n = model.n, m = model.m;

  FrozenRunConfig ref_cfg = cfg;
  ref_cfg.seed = derive_key(cfg.seed, "decay/reference");
  const BbarEstimate ref = estimate_bbar(model, x, mu, ref_cfg);
  double ref_var = 0.0;
  for (double se : ref.std_error) ref_var += se * se;

  std::vector<std::size_t> grid_steps;
  for (double t : t_grid) grid_steps.push_back(static_cast<std::size_t>(std::llround(t / cfg.dt)));

  ErgodicDecayProfile out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  out.reference_bbar_se = std::sqrt(ref_var);
  std::size_t next = 0;
  Vec value(n);
  run_frozen(model, x, mu, replications, cfg.dt, grid_steps.back(),
             NoiseSource(cfg.seed, "decay/W"), z0,
             [&](std::size_t step, double, std::span<const double> zs) {
               while (next < grid_steps.size() && grid_steps[next] == step) {
                 Vec sum(n, 0.0), sum_sq(n, 0.0);
                 for (std::size_t i = 0; i < replications; ++i) {
                   model.b1(x, mu, zs.subspan(i * m, m), value);
                   for (std::size_t k = 0; k < n; ++k) {
                     sum[k] += value[k];
                     sum_sq[k] += value[k] * value[k];
                   }
                 }
                 const double r = static_cast<double>(replications);
                 double dev = 0.0, var = ref_var;
                 for (std::size_t k = 0; k < n; ++k) {
                   const double mean = sum[k] / r;
                   dev += (mean - ref.drift[k]) * (mean - ref.drift[k]);
                   var += std::max(0.0, sum_sq[k] / r - mean * mean) / r;
                 }
                 out.deviations.push_back(std::sqrt(dev));
                 out.noise_floor.push_back(std::sqrt(var));
                 ++next;
               }
             });
  return out;
}

void fit_decay(ErgodicDecayProfile& profile) {
  std::size_t count = 0;
  while (count < profile.deviations.size() &&
         profile.deviations[count] > 3.0 * profile.noise_floor[count])
    ++count;
  if (count < 3)
    fail(ErrorCode::FitFailure,
         "decay deviations reach the Monte Carlo noise floor before 3 grid points");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = profile.t_grid[i], y = std::log(profile.deviations[i]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double c = static_cast<double>(count);
  const double slope = (c * sty - st * sy) / (c * stt - st * st);
  const double intercept = (sy - slope * st) / c;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / c;
  for (std::size_t i = 0; i < count; ++i) {
    const double y = std::log(profile.deviations[i]);
    const double fit = intercept + slope * profile.t_grid[i];
    ss_res += (y - fit) * (y - fit);
    ss_tot += (y - ybar) * (y - ybar);
  }
  profile.fitted_rate = -slope;
  profile.fit_intercept = intercept;
  profile.fit_r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  profile.fit_points = count;
}

ErgodicDecayProfile ergodic_decay_profile(const ModelSpec& model, std::span<const double> x,
                                          const MeasureSummary& mu, std::span<const double> z0,
                                          std::span<const double> t_grid,
                                          std::size_t replications, const FrozenRunConfig& cfg) {
  ErgodicDecayProfile profile = decay_deviations(model, x, mu, z0, t_grid, replications, cfg);
  fit_decay(profile);
  return profile;
}

// ---------------------------------------------------------------------------

const char* oracle_mode_name(OracleMode mode) {
  switch (mode) {
    case OracleMode::Estimated: return "estimated";
    case OracleMode::AnalyticLinear: return "analytic-linear";
    case OracleMode::User: return "user";
  }
  return "unknown";
}

struct AveragedDriftOracle::State {
  mutable std::shared_mutex mutex;
  std::map<Key, CacheEntry> cache;
  std::atomic<std::size_t> runs{0};
};

AveragedDriftOracle::AveragedDriftOracle(ModelSpec model, OracleMode mode,
                                         FrozenRunConfig frozen_cfg, double quantization,
                                         UserDrift user)
    : model_(std::move(model)),
      mode_(mode),
      frozen_cfg_(frozen_cfg),
      quantization_(quantization),
      user_(std::move(user)),
      state_(std::make_shared<State>()) {
  if (mode_ == OracleMode::Estimated && !(quantization_ > 0.0))
    fail(ErrorCode::InvalidParams, "estimated oracle needs quantization > 0");
  if (mode_ == OracleMode::AnalyticLinear && !model_.linear)
    fail(ErrorCode::UnsupportedModel, "analytic-linear oracle needs the linear reference model");
  if (mode_ == OracleMode::User && !user_)
    fail(ErrorCode::InvalidParams, "user oracle needs a drift function");
}

AveragedDriftOracle::Key AveragedDriftOracle::key_for(std::span<const double> x,
                                                      const MeasureSummary& mu) const {
  Key key;
  key.reserve(2 * x.size() + 1);
  for (double v : x) key.push_back(std::llround(v / quantization_));
  for (double v : mu.mean) key.push_back(std::llround(v / quantization_));
  key.push_back(std::llround(mu.second_moment / quantization_));
  return key;
}

AveragedDriftOracle::CacheEntry AveragedDriftOracle::compute(const Key& key) const {
  const std::size_t n = model_.n;
  Vec x(n), mean(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(key[i]) * quantization_;
    mean[i] = static_cast<double>(key[n + i]) * quantization_;
  }
  const MeasureSummary mu =
      MeasureSummary::from_moments(mean, static_cast<double>(key[2 * n]) * quantization_);
  std::string label = "cell";
  for (auto k : key) label += ":" + std::to_string(k);
  FrozenRunConfig cfg = frozen_cfg_;
  cfg.seed = derive_key(frozen_cfg_.seed, label);
  BbarEstimate est = estimate_bbar(model_, x, mu, cfg);
  state_->runs.fetch_add(1);
  return CacheEntry{key, std::move(est.drift), std::move(est.std_error)};
}

const AveragedDriftOracle::CacheEntry& AveragedDriftOracle::lookup_or_compute(
    const Key& key) const {
  {
    std::shared_lock lock(state_->mutex);
    auto it = state_->cache.find(key);
    if (it != state_->cache.end()) return it->second;
  }
  CacheEntry entry = compute(key);
  std::unique_lock lock(state_->mutex);
  // A concurrent insert of the same key carries the same deterministic value.
  return state_->cache.try_emplace(key, std::move(entry)).first->second;
}

void AveragedDriftOracle::prepare(std::span<const double> xs, std::size_t dim,
                                  const MeasureSummary& mu) const {
  if (mode_ != OracleMode::Estimated) return;
  std::vector<Key> missing;
  {
    std::shared_lock lock(state_->mutex);
    for (std::size_t i = 0; i < xs.size() / dim; ++i) {
      Key key = key_for(xs.subspan(i * dim, dim), mu);
      if (!state_->cache.contains(key)) missing.push_back(std::move(key));
    }
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  std::vector<CacheEntry> fresh(missing.size());
  parallel_for(missing.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fresh[i] = compute(missing[i]);
  });
  std::unique_lock lock(state_->mutex);
  for (auto& entry : fresh) state_->cache.try_emplace(entry.key, std::move(entry));
}

void AveragedDriftOracle::eval(std::span<const double> x, const MeasureSummary& mu,
                               std::span<double> out) const {
  switch (mode_) {
    case OracleMode::AnalyticLinear: {
      const Vec v = analytic_bbar_linear(*model_.linear, x, mu.mean);
      std::copy(v.begin(), v.end(), out.begin());
      return;
    }
    case OracleMode::User:
      user_(x, mu, out);
      return;
    case OracleMode::Estimated: {
      const Key key = key_for(x, mu);
      const CacheEntry& entry = lookup_or_compute(key);
      std::shared_lock lock(state_->mutex);
      std::copy(entry.drift.begin(), entry.drift.end(), out.begin());
      return;
    }
  }
}

std::size_t AveragedDriftOracle::cache_size() const {
  std::shared_lock lock(state_->mutex);
  return state_->cache.size();
}

std::size_t AveragedDriftOracle::frozen_runs() const { return state_->runs.load(); }

std::vector<AveragedDriftOracle::CacheEntry> AveragedDriftOracle::cache_entries() const {
  std::shared_lock lock(state_->mutex);
  std::vector<CacheEntry> out;
  for (const auto& [key, entry] : state_->cache) out.push_back(entry);
  return out;
}

std::string AveragedDriftOracle::frozen_config_digest() const {
  std::ostringstream s;
  s << "M=" << frozen_cfg_.M << ";dt=" << fmt17(frozen_cfg_.dt) << ";burn_in="
    << (frozen_cfg_.burn_in ? fmt17(*frozen_cfg_.burn_in) : std::string("auto"))
    << ";avg_window=" << fmt17(frozen_cfg_.avg_window) << ";seed=" << frozen_cfg_.seed
    << ";q=" << fmt17(quantization_);
  return content_digest(s.str());
}

void AveragedDriftOracle::save_cache(std::ostream& os) const {
  const std::size_t n = model_.n;
  os << csv_schema_line("drift-cache");
  for (std::size_t i = 0; i < n; ++i) os << "kx" << i << ',';
  for (std::size_t i = 0; i < n; ++i) os << "kmu" << i << ',';
  os << "km2";
  for (std::size_t i = 0; i < n; ++i) os << ",drift" << i;
  for (std::size_t i = 0; i < n; ++i) os << ",std_error" << i;
  os << ",cfg_digest\n";
  const std::string digest = frozen_config_digest();
  for (const auto& entry : cache_entries()) {
    for (std::size_t i = 0; i < entry.key.size(); ++i) os << (i ? "," : "") << entry.key[i];
    for (double v : entry.drift) os << ',' << fmt17(v);
    for (double v : entry.std_error) os << ',' << fmt17(v);
    os << ',' << digest << '\n';
  }
}

std::size_t AveragedDriftOracle::load_cache(std::istream& is) {
  const std::size_t n = model_.n;
  const std::string expected = csv_schema_line("drift-cache");
  std::string line;
  if (!std::getline(is, line) || line + '\n' != expected)
    fail(ErrorCode::ParseError, "drift cache: missing or unsupported schema line");
  std::getline(is, line);  // column header
  const std::string digest = frozen_config_digest();
  std::size_t loaded = 0;
  std::size_t row = 2;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4 * n + 2)
      fail(ErrorCode::ParseError, "drift cache: wrong column count on line " + std::to_string(row));
    if (cells.back() != digest) continue;
    CacheEntry entry;
    try {
      for (std::size_t i = 0; i < 2 * n + 1; ++i) entry.key.push_back(std::stoll(cells[i]));
      for (std::size_t i = 0; i < n; ++i) entry.drift.push_back(std::stod(cells[2 * n + 1 + i]));
      for (std::size_t i = 0; i < n; ++i) entry.std_error.push_back(std::stod(cells[3 * n + 1 + i]));
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "drift cache: bad number on line " + std::to_string(row));
    }
    std::unique_lock lock(state_->mutex);
    if (state_->cache.try_emplace(entry.key, entry).second) ++loaded;
  }
  return loaded;
}

AveragedDriftOracle make_drift_oracle(const ModelSpec& model, OracleMode mode,
                                      const FrozenRunConfig& frozen_cfg, double quantization,
                                      UserDrift user) {
  return AveragedDriftOracle(model, mode, frozen_cfg, quantization, std::move(user));
}

}  // namespace mvx
