// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/sde.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

#include "mvx/error.hpp"
#include "mvx/io.hpp"
#include "mvx/parallel.hpp"

namespace mvx {

std::size_t macro_steps(const SdeConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
    fail(ErrorCode::ValidationError, "epsilon must lie in (0,1]");
  if (!(cfg.T > 0.0)) fail(ErrorCode::ValidationError, "T>0 violated");
  if (!(cfg.dt_macro > 0.0 && cfg.dt_macro <= cfg.T))
    fail(ErrorCode::ValidationError, "0<dt_macro<=T violated");
  if (cfg.N < 2) fail(ErrorCode::ValidationError, "N>=2 violated");
  if (cfg.delta_eps && !(*cfg.delta_eps > 0.0))
    fail(ErrorCode::ValidationError, "delta_eps>0 violated");
  const double ratio = cfg.T / cfg.dt_macro;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
    fail(ErrorCode::ValidationError, "T must be an integer multiple of dt_macro");
  return steps;
}

std::size_t stable_substeps(const ModelSpec& model, double dt_macro, double epsilon) {
  const double need = dt_macro * model.fast_stiffness / (kFastStepCap * epsilon);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(need * (1.0 - 1e-12))));
}

std::size_t resolve_substeps(const ModelSpec& model, const SdeConfig& cfg) {
  const std::size_t suggested = stable_substeps(model, cfg.dt_macro, cfg.epsilon);
  if (cfg.micro_substeps == 0) return suggested;
  const double step = cfg.dt_macro / (static_cast<double>(cfg.micro_substeps) * cfg.epsilon);
  if (step * model.fast_stiffness > kFastStepCap * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "fast step dt_macro/(micro_substeps*epsilon)=" << step
        << " exceeds stability cap 0.25/gamma_est=" << kFastStepCap / model.fast_stiffness
        << "; use micro_substeps>=" << suggested;
    fail(ErrorCode::ValidationError, msg.str());
  }
  return cfg.micro_substeps;
}

MeasureSummary summarize_rows(std::span<const double> rows, std::size_t dim) {
  MeasureSummary s;
  const std::size_t count = rows.size() / dim;
  s.mean.assign(dim, 0.0);
  s.n_points = count;
  const double w = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = rows[i * dim + k];
      s.mean[k] += w * v;
      sq += v * v;
    }
    s.second_moment += w * sq;
  }
  double mean_sq = 0.0;
  for (double v : s.mean) mean_sq += v * v;
  s.second_moment = std::max(s.second_moment, mean_sq);
  return s;
}

void check_finite(std::span<const double> values, std::size_t dim, std::size_t step,
                  const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << what << " coordinate " << i % dim << " of particle " << i / dim
          << " is not finite after macro step " << step;
      fail(ErrorCode::Instability, msg.str());
    }
  }
}

namespace {

// Per-chunk work buffers.
struct Scratch {
  Vec b1_ref, b1_cur, b1_acc, s1, dB, b2, s2, dW;
  Scratch(std::size_t n, std::size_t m)
      : b1_ref(n), b1_cur(n), b1_acc(n), s1(n * n), dB(n), b2(m), s2(m * m), dW(m) {}
};

// x <- x + drift dt + sigma dB; shared by both slow schemes so that equal
// inputs give bit-identical outputs.
inline void slow_update(std::span<double> x, std::span<const double> drift, double dt,
                        std::span<const double> sigma, std::span<const double> dB) {
  const std::size_t n = x.size();
  for (std::size_t r = 0; r < n; ++r) {
    double diffusion = 0.0;
    for (std::size_t c = 0; c < n; ++c) diffusion += sigma[r * n + c] * dB[c];
    x[r] = x[r] + drift[r] * dt + diffusion;
  }
}

inline void draw_slow_noise(const StepPlan& plan, std::uint32_t particle, std::uint32_t step,
                            std::span<double> dB) {
  const double scale = std::sqrt(plan.dt);
  for (std::size_t c = 0; c < dB.size(); ++c)
    dB[c] = scale * plan.slow_noise.normal(particle, static_cast<std::uint32_t>(c), step, 0);
}

// Fast Euler substeps with slow inputs frozen. When accumulate_b1 is set the
// mean of b1 along the substeps is left in s.b1_ref, computed as
// first + sum(v_j - first)/k so a z-free b1 reproduces b1 exactly.
void fast_substeps(const ModelSpec& model, std::span<const double> x, const MeasureSummary& mu,
                   std::span<double> z, const MeasureSummary& nu, const StepPlan& plan,
                   std::uint32_t particle, std::uint32_t step, Scratch& s, bool accumulate_b1) {
  const std::size_t m = z.size();
  const std::size_t k = plan.substeps;
  const double h = plan.dt / static_cast<double>(k);
  const double drift_scale = h / plan.epsilon;
  const double noise_scale = std::sqrt(h / plan.epsilon);
  if (accumulate_b1) std::fill(s.b1_acc.begin(), s.b1_acc.end(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (accumulate_b1) {
      if (j == 0) {
        model.b1(x, mu, z, s.b1_ref);
      } else {
        model.b1(x, mu, z, s.b1_cur);
        for (std::size_t r = 0; r < s.b1_acc.size(); ++r) s.b1_acc[r] += s.b1_cur[r] - s.b1_ref[r];
      }
    }
    model.b2(x, mu, z, nu, s.b2);
    model.sigma2(x, mu, z, nu, s.s2);
    for (std::size_t c = 0; c < m; ++c)
      s.dW[c] = plan.fast_noise.normal(particle, static_cast<std::uint32_t>(c), step,
                                       static_cast<std::uint32_t>(j));
    for (std::size_t r = 0; r < m; ++r) {
      double diffusion = 0.0;
      for (std::size_t c = 0; c < m; ++c) diffusion += s.s2[r * m + c] * s.dW[c];
      z[r] = z[r] + s.b2[r] * drift_scale + noise_scale * diffusion;
    }
  }
  if (accumulate_b1) {
    const double inv = static_cast<double>(k);
    for (std::size_t r = 0; r < s.b1_ref.size(); ++r) s.b1_ref[r] = s.b1_ref[r] + s.b1_acc[r] / inv;
  }
}

std::vector<double> replicate(std::span<const double> point, std::size_t count) {
  std::vector<double> out;
  out.reserve(point.size() * count);
  for (std::size_t i = 0; i < count; ++i) out.insert(out.end(), point.begin(), point.end());
  return out;
}

}  // namespace

void step_slow_fast(const ModelSpec& model, const MeasureSummary& mu, const MeasureSummary& nu,
                    const StepPlan& plan, std::uint32_t step, std::size_t begin, std::size_t end,
                    std::span<double> xs, std::span<double> zs) {
  const std::size_t n = model.n, m = model.m;
  Scratch s(n, m);
  for (std::size_t i = begin; i < end; ++i) {
    auto x = xs.subspan(i * n, n);
    auto z = zs.subspan(i * m, m);
    const auto particle = static_cast<std::uint32_t>(i);
    fast_substeps(model, x, mu, z, nu, plan, particle, step, s, true);
    model.sigma1(x, mu, s.s1);
    draw_slow_noise(plan, particle, step, s.dB);
    slow_update(x, s.b1_ref, plan.dt, s.s1, s.dB);
  }
}

void step_averaged(const ModelSpec& model, const AveragedDrift& drift, const MeasureSummary& mu,
                   const StepPlan& plan, std::uint32_t step, std::size_t begin, std::size_t end,
                   std::span<double> xs) {
  const std::size_t n = model.n;
  Scratch s(n, model.m);
  for (std::size_t i = begin; i < end; ++i) {
    auto x = xs.subspan(i * n, n);
    const auto particle = static_cast<std::uint32_t>(i);
    drift.eval(x, mu, s.b1_ref);
    model.sigma1(x, mu, s.s1);
    draw_slow_noise(plan, particle, step, s.dB);
    slow_update(x, s.b1_ref, plan.dt, s.s1, s.dB);
  }
}

namespace {

StepPlan signal_plan(const ModelSpec& model, const SdeConfig& cfg) {
  StepPlan plan;
  plan.epsilon = cfg.epsilon;
  plan.dt = cfg.dt_macro;
  plan.substeps = resolve_substeps(model, cfg);
  plan.slow_noise = NoiseSource(cfg.seed, "signal/B");
  plan.fast_noise = NoiseSource(cfg.seed, "signal/W");
  return plan;
}

NoiseTag signal_tag(const SdeConfig& cfg, std::size_t substeps, bool with_fast) {
  return NoiseTag{cfg.seed, "signal/B", with_fast ? "signal/W" : "", substeps};
}

}  // namespace

std::size_t run_slow_fast(const ModelSpec& model, const SdeConfig& cfg,
                          const SignalObserver& observer) {
  const std::size_t steps = macro_steps(cfg);
  const StepPlan plan = signal_plan(model, cfg);
  const std::size_t n = model.n, m = model.m, N = cfg.N;

  std::vector<double> xs = replicate(model.x0, N);
  std::vector<double> zs = replicate(model.z0, N);
  observer(0, xs, zs);
  for (std::size_t s = 0; s < steps; ++s) {
    const MeasureSummary mu = summarize_rows(xs, n);
    const MeasureSummary nu = summarize_rows(zs, m);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      step_slow_fast(model, mu, nu, plan, static_cast<std::uint32_t>(s), b, e, xs, zs);
    });
    check_finite(xs, n, s, "slow");
    check_finite(zs, m, s, "fast");
    observer(s + 1, xs, zs);
  }
  return plan.substeps;
}

PathEnsemble simulate_slow_fast(const ModelSpec& model, const SdeConfig& cfg) {
  PathEnsemble path;
  const std::size_t substeps =
      run_slow_fast(model, cfg, [&](std::size_t step, std::span<const double> xs,
                                    std::span<const double> zs) {
        path.times.push_back(static_cast<double>(step) * cfg.dt_macro);
        path.slow.emplace_back(std::vector<double>(xs.begin(), xs.end()), model.n);
        path.fast.emplace_back(std::vector<double>(zs.begin(), zs.end()), model.m);
      });
  path.noise = signal_tag(cfg, substeps, true);
  return path;
}

PathEnsemble simulate_averaged(const ModelSpec& model, const AveragedDrift& drift,
                               const SdeConfig& cfg) {
  const std::size_t steps = macro_steps(cfg);
  StepPlan plan = signal_plan(model, cfg);
  const std::size_t n = model.n, N = cfg.N;

  std::vector<double> xs = replicate(model.x0, N);
  PathEnsemble path;
  path.noise = signal_tag(cfg, 0, false);
  path.times.push_back(0.0);
  path.slow.emplace_back(xs, n);

  for (std::size_t s = 0; s < steps; ++s) {
    const MeasureSummary mu = summarize_rows(xs, n);
    drift.prepare(xs, n, mu);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      step_averaged(model, drift, mu, plan, static_cast<std::uint32_t>(s), b, e, xs);
    });
    check_finite(xs, n, s, "averaged");
    path.times.push_back(static_cast<double>(s + 1) * cfg.dt_macro);
    path.slow.emplace_back(xs, n);
  }
  return path;
}

std::pair<PathEnsemble, PathEnsemble> coupled_pair(const ModelSpec& model,
                                                   const AveragedDrift& drift,
                                                   const SdeConfig& cfg) {
  return {simulate_slow_fast(model, cfg), simulate_averaged(model, drift, cfg)};
}

void run_frozen(const ModelSpec& model, std::span<const double> x, const MeasureSummary& mu,
                std::size_t particles, double dt, std::size_t steps, const NoiseSource& noise,
                std::span<const double> z0, const FrozenObserver& observer) {
  const std::size_t m = model.m;
  if (x.size() != model.n || mu.dim() != model.n)
    fail(ErrorCode::DimensionMismatch, "frozen run: (x, mu) do not match slow dimension");
  if (z0.empty()) z0 = model.z0;
  if (z0.size() != m) fail(ErrorCode::DimensionMismatch, "frozen run: z0 has wrong dimension");
  std::vector<double> zs = replicate(z0, particles);
  const double sqdt = std::sqrt(dt);
  observer(0, 0.0, zs);
  for (std::size_t s = 0; s < steps; ++s) {
    const MeasureSummary nu = summarize_rows(zs, m);
    parallel_for(particles, [&](std::size_t b, std::size_t e) {
      Vec drift(m), sigma(m * m), dW(m);
      for (std::size_t i = b; i < e; ++i) {
        auto z = std::span<double>(zs).subspan(i * m, m);
        model.b2(x, mu, z, nu, drift);
        model.sigma2(x, mu, z, nu, sigma);
        for (std::size_t c = 0; c < m; ++c)
          dW[c] = sqdt * noise.normal(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c),
                                      static_cast<std::uint32_t>(s), 0);
        for (std::size_t r = 0; r < m; ++r) {
          double diffusion = 0.0;
          for (std::size_t c = 0; c < m; ++c) diffusion += sigma[r * m + c] * dW[c];
          z[r] = z[r] + drift[r] * dt + diffusion;
        }
      }
    });
    check_finite(zs, m, s, "frozen");
    observer(s + 1, static_cast<double>(s + 1) * dt, zs);
  }
}

PathEnsemble simulate_frozen(const ModelSpec& model, std::span<const double> x,
                             const MeasureSummary& mu, const FrozenRunConfig& cfg,
                             std::span<const double> z0) {
  if (cfg.M < 2) fail(ErrorCode::ValidationError, "M>=2 violated");
  if (!(cfg.dt > 0.0)) fail(ErrorCode::ValidationError, "frozen dt>0 violated");
  if (!(cfg.avg_window > 0.0)) fail(ErrorCode::ValidationError, "avg_window>0 violated");
  const double burn_in = cfg.burn_in.value_or(default_burn_in(model));
  if (!(burn_in >= 0.0)) fail(ErrorCode::ValidationError, "burn_in>=0 violated");
  const auto steps = static_cast<std::size_t>(std::llround((burn_in + cfg.avg_window) / cfg.dt));

  PathEnsemble path;
  path.noise = NoiseTag{cfg.seed, "", "frozen/W", 1};
  path.times.reserve(steps + 1);
  path.fast.reserve(steps + 1);
  run_frozen(model, x, mu, cfg.M, cfg.dt, steps, NoiseSource(cfg.seed, "frozen/W"), z0,
             [&](std::size_t, double t, std::span<const double> zs) {
               path.times.push_back(t);
               path.fast.emplace_back(std::vector<double>(zs.begin(), zs.end()), model.m);
             });
  return path;
}

std::vector<std::size_t> segment_starts(const SdeConfig& cfg) {
  if (!cfg.delta_eps) fail(ErrorCode::MissingDelta, "auxiliary process needs delta_eps");
  const std::size_t steps = macro_steps(cfg);
  const double ratio = *cfg.delta_eps / cfg.dt_macro;
  std::vector<std::size_t> starts{0};
  for (std::size_t k = 1;; ++k) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(k) * ratio));
    if (s >= steps) break;
    if (s > starts.back()) starts.push_back(s);
  }
  return starts;
}

PathEnsemble simulate_auxiliary(const ModelSpec& model, const PathEnsemble& slow_path,
                                const SdeConfig& cfg) {
  const std::vector<std::size_t> starts = segment_starts(cfg);
  const std::size_t steps = macro_steps(cfg);
  if (slow_path.fast.size() != steps + 1 || slow_path.slow.size() != steps + 1)
    fail(ErrorCode::GridMismatch, "auxiliary process needs a slow-fast path on the cfg grid");
  const std::size_t n = model.n, m = model.m;
  const std::size_t N = slow_path.particles();

  StepPlan plan;
  plan.epsilon = cfg.epsilon;
  plan.dt = cfg.dt_macro;
  plan.substeps = slow_path.noise.substeps;
  plan.fast_noise = NoiseSource(slow_path.noise.seed, slow_path.noise.fast_label);

  PathEnsemble out = slow_path;
  out.aux.clear();
  std::vector<double> zhat;
  std::vector<double> x_frozen;
  MeasureSummary mu_frozen;
  std::size_t next_segment = 0;
  for (std::size_t s = 0; s <= steps; ++s) {
    if (next_segment < starts.size() && starts[next_segment] == s) {
      zhat = slow_path.fast[s].points();
      x_frozen = slow_path.slow[s].points();
      mu_frozen = summarize(slow_path.slow[s]);
      ++next_segment;
    }
    out.aux.emplace_back(zhat, m);
    if (s == steps) break;
    const MeasureSummary nu = summarize_rows(zhat, m);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      Scratch scratch(n, m);
      for (std::size_t i = b; i < e; ++i) {
        auto x = std::span<const double>(x_frozen).subspan(i * n, n);
        auto z = std::span<double>(zhat).subspan(i * m, m);
        fast_substeps(model, x, mu_frozen, z, nu, plan, static_cast<std::uint32_t>(i),
                      static_cast<std::uint32_t>(s), scratch, false);
      }
    });
    check_finite(zhat, m, s, "auxiliary");
  }
  return out;
}

void write_path_csv(std::ostream& os, const PathEnsemble& path) {
  const std::size_t n = path.slow.empty() ? 0 : path.slow.front().dim();
  const std::size_t m = path.fast.empty() ? 0 : path.fast.front().dim();
  os << "time,particle";
  for (std::size_t k = 0; k < n; ++k) os << ",x" << k;
  for (std::size_t k = 0; k < m; ++k) os << ",z" << k;
  if (!path.aux.empty())
    for (std::size_t k = 0; k < m; ++k) os << ",zhat" << k;
  os << '\n';
  const std::size_t N = path.particles();
  for (std::size_t t = 0; t < path.times.size(); ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      os << fmt17(path.times[t]) << ',' << i;
      if (n)
        for (double v : path.slow[t].point(i)) os << ',' << fmt17(v);
      if (m)
        for (double v : path.fast[t].point(i)) os << ',' << fmt17(v);
      if (!path.aux.empty())
        for (double v : path.aux[t].point(i)) os << ',' << fmt17(v);
      os << '\n';
    }
  }
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'X', 'P', 'A', 'T', 'H', '\0'};
constexpr std::uint32_t kBinaryVersion = 1;

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint64_t bits = 0;
  if constexpr (sizeof(T) == 8) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t raw(std::size_t width) {
    if (pos_ + width > bytes_.size()) fail(ErrorCode::IoError, "path snapshot is truncated");
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < width; ++b)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += width;
    return v;
  }
  double f64() { return std::bit_cast<double>(raw(8)); }
  std::string_view take(std::size_t width) {
    if (pos_ + width > bytes_.size()) fail(ErrorCode::IoError, "path snapshot is truncated");
    auto s = bytes_.substr(pos_, width);
    pos_ += width;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_path_binary(const PathEnsemble& path) {
  const std::uint64_t n = path.slow.empty() ? 0 : path.slow.front().dim();
  const std::uint64_t m = path.fast.empty() ? (path.aux.empty() ? 0 : path.aux.front().dim())
                                            : path.fast.front().dim();
  const std::uint32_t flags = (path.fast.empty() ? 0u : 1u) | (path.aux.empty() ? 0u : 2u);
  std::string out(kMagic, sizeof kMagic);
  put_le(out, kBinaryVersion);
  put_le(out, flags);
  put_le(out, n);
  put_le(out, m);
  put_le(out, static_cast<std::uint64_t>(path.times.size()));
  put_le(out, static_cast<std::uint64_t>(path.particles()));
  for (double t : path.times) put_le(out, t);
  for (const auto* clouds : {&path.slow, &path.fast, &path.aux})
    for (const auto& cloud : *clouds)
      for (double v : cloud.points()) put_le(out, v);
  return out;
}

PathEnsemble decode_path_binary(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    fail(ErrorCode::IoError, "not a path snapshot (bad magic)");
  if (in.raw(4) != kBinaryVersion) fail(ErrorCode::IoError, "unsupported path snapshot version");
  const auto flags = static_cast<std::uint32_t>(in.raw(4));
  const std::size_t n = in.raw(8), m = in.raw(8), times = in.raw(8), N = in.raw(8);
  PathEnsemble path;
  path.times.resize(times);
  for (auto& t : path.times) t = in.f64();
  auto read_clouds = [&](std::vector<ParticleCloud>& clouds, std::size_t dim) {
    for (std::size_t t = 0; t < times; ++t) {
      std::vector<double> pts(N * dim);
      for (auto& v : pts) v = in.f64();
      clouds.emplace_back(std::move(pts), dim);
    }
  };
  if (n) read_clouds(path.slow, n);
  if (flags & 1u) read_clouds(path.fast, m);
  if (flags & 2u) read_clouds(path.aux, m);
  if (!in.done()) fail(ErrorCode::IoError, "trailing bytes in path snapshot");
  return path;
}

}  // namespace mvx
