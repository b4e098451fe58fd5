// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "mvx/error.hpp"
#include "mvx/io.hpp"
#include "mvx/parallel.hpp"

namespace mvx {

LawTrace law_trace(const PathEnsemble& path) {
  LawTrace trace;
  trace.times = path.times;
  trace.slow.reserve(path.slow.size());
  for (const auto& cloud : path.slow) trace.slow.push_back(summarize(cloud));
  trace.fast.reserve(path.fast.size());
  for (const auto& cloud : path.fast) trace.fast.push_back(summarize(cloud));
  return trace;
}

namespace {

// Ratio of obs_dt to grid_dt as an integer stride, or GridMismatch.
std::size_t grid_stride(double obs_dt, double grid_dt) {
  if (!(obs_dt > 0.0) || !(grid_dt > 0.0))
    fail(ErrorCode::GridMismatch, "observation and signal steps must be positive");
  const double ratio = obs_dt / grid_dt;
  const auto stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio)
    fail(ErrorCode::GridMismatch, "observation step is not a multiple of the signal step");
  return stride;
}

}  // namespace

ObservationPath generate_observations(const ModelSpec& model, const PathEnsemble& signal,
                                      std::size_t reference_particle, double dt,
                                      std::uint64_t seed_v) {
  if (signal.slow.size() < 2 || signal.times.size() != signal.slow.size())
    fail(ErrorCode::GridMismatch, "signal has no slow clouds on a macro grid");
  if (reference_particle >= signal.particles())
    fail(ErrorCode::IndexOutOfRange, "reference_particle " + std::to_string(reference_particle) +
                                         " >= N=" + std::to_string(signal.particles()));
  const std::size_t macro = signal.times.size() - 1;
  const std::size_t stride = grid_stride(dt, signal.times[1] - signal.times[0]);
  if (macro % stride != 0)
    fail(ErrorCode::GridMismatch, "observation stride does not divide the signal grid");

  ObservationPath obs;
  obs.dt = dt;
  obs.stride = stride;
  obs.reference_particle = reference_particle;
  obs.seed_v = seed_v;
  obs.signal_law_trace = law_trace(signal);

  const NoiseSource noise(seed_v, "obs/V");
  const std::size_t l = model.l;
  const double sqdt = std::sqrt(dt);
  Vec h(l);
  obs.times.push_back(signal.times[0]);
  for (std::size_t k = 1; k * stride <= macro; ++k) {
    const std::size_t idx = k * stride;
    model.h(signal.slow[idx].point(reference_particle), obs.signal_law_trace.slow[idx], h);
    Vec dY(l);
    for (std::size_t c = 0; c < l; ++c) {
      const double dV = sqdt * noise.normal(0, static_cast<std::uint32_t>(c),
                                            static_cast<std::uint32_t>(k - 1), 0);
      dY[c] = dV + h[c] * dt;
      if (!std::isfinite(dY[c]))
        fail(ErrorCode::NonFiniteResult, "observation increment is not finite");
    }
    obs.times.push_back(signal.times[idx]);
    obs.increments.push_back(std::move(dY));
  }
  return obs;
}

double log_likelihood_increment(std::span<const double> h_val, std::span<const double> dY,
                                double dt) {
  double inner = 0.0, sq = 0.0;
  for (std::size_t c = 0; c < h_val.size(); ++c) {
    inner += h_val[c] * dY[c];
    sq += h_val[c] * h_val[c];
  }
  return inner - 0.5 * sq * dt;
}

const char* functional_name(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::One: return "one";
    case FunctionalKind::Identity: return "identity";
    case FunctionalKind::Tanh: return "tanh";
  }
  return "?";
}

FunctionalKind functional_from_name(std::string_view name) {
  if (name == "one") return FunctionalKind::One;
  if (name == "identity") return FunctionalKind::Identity;
  if (name == "tanh") return FunctionalKind::Tanh;
  fail(ErrorCode::ValidationError, "unknown functional '" + std::string(name) + "'");
}

double evaluate_functional(FunctionalKind kind, std::span<const double> x,
                           const MeasureSummary& mu) {
  switch (kind) {
    case FunctionalKind::One:
      return 1.0;
    case FunctionalKind::Identity:
      return x[0];
    case FunctionalKind::Tanh: {
      const double c = 1.0 / std::sqrt(static_cast<double>(x.size()));
      double px = 0.0, pm = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        px += c * x[k];
        pm += c * mu.mean[k];
      }
      return std::tanh(px) + std::tanh(pm);
    }
  }
  return 0.0;
}

void validate(const FilterConfig& cfg) {
  if (cfg.Nf < 10) fail(ErrorCode::ValidationError, "Nf>=10 violated");
  if (!(cfg.resample_threshold > 0.0 && cfg.resample_threshold <= 1.0))
    fail(ErrorCode::ValidationError, "resample_threshold in (0,1] violated");
  if (!(cfg.p > 0.0)) fail(ErrorCode::ValidationError, "p>0 violated");
}

const char* signal_kind_name(SignalKind kind) {
  return kind == SignalKind::Multiscale ? "multiscale" : "averaged";
}

FilterTrajectory run_filter(SignalKind kind, const ModelSpec& model, const AveragedDrift* drift,
                            const ObservationPath& obs, const FilterConfig& cfg,
                            const SdeConfig& sde_cfg,
                            const std::optional<LawTrace>& averaged_law) {
  validate(cfg);
  const std::size_t steps = macro_steps(sde_cfg);
  if (kind == SignalKind::Averaged && drift == nullptr)
    fail(ErrorCode::ValidationError, "averaged filter requires a drift oracle");
  const std::size_t stride = grid_stride(obs.dt, sde_cfg.dt_macro);
  if (stride != obs.stride || obs.increments.size() * stride != steps ||
      obs.times.size() != obs.increments.size() + 1)
    fail(ErrorCode::GridMismatch, "observation grid does not match the filter time grid");

  LawTrace own_law;
  const LawTrace* law = &obs.signal_law_trace;
  if (kind == SignalKind::Averaged) {
    if (averaged_law) {
      law = &*averaged_law;
    } else {
      own_law = law_trace(simulate_averaged(model, *drift, sde_cfg));
      law = &own_law;
    }
  }
  if (law->slow.size() != steps + 1 ||
      (kind == SignalKind::Multiscale && law->fast.size() != steps + 1))
    fail(ErrorCode::GridMismatch, "law trace does not cover the filter time grid");

  const std::size_t n = model.n, m = model.m, l = model.l, Nf = cfg.Nf;
  StepPlan plan;
  plan.epsilon = sde_cfg.epsilon;
  plan.dt = sde_cfg.dt_macro;
  plan.substeps = kind == SignalKind::Multiscale ? resolve_substeps(model, sde_cfg) : 1;
  plan.slow_noise = NoiseSource(sde_cfg.seed, "filter/B");
  plan.fast_noise = NoiseSource(sde_cfg.seed, "filter/W");
  const NoiseSource resample_noise(sde_cfg.seed, "filter/resample");

  std::vector<double> xs, zs;
  xs.reserve(Nf * n);
  for (std::size_t i = 0; i < Nf; ++i) xs.insert(xs.end(), model.x0.begin(), model.x0.end());
  if (kind == SignalKind::Multiscale) {
    zs.reserve(Nf * m);
    for (std::size_t i = 0; i < Nf; ++i) zs.insert(zs.end(), model.z0.begin(), model.z0.end());
  }
  std::vector<double> logw(Nf, 0.0), unnorm(Nf), fval(Nf);
  double log_offset = 0.0;

  FilterTrajectory traj;
  const std::size_t K = obs.increments.size();
  traj.times = obs.times;
  for (auto* v : {&traj.pi_F, &traj.rho_F, &traj.rho_1, &traj.log_rho1, &traj.ess})
    v->reserve(K + 1);

  auto eval_f = [&](const MeasureSummary& mu) {
    parallel_for(Nf, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        fval[i] = evaluate_functional(cfg.functional, {xs.data() + i * n, n}, mu);
    });
  };

  // t = 0: uniform weights.
  eval_f(law->slow[0]);
  {
    double sum = 0.0;
    for (std::size_t i = 0; i < Nf; ++i) sum += fval[i];
    traj.rho_F.push_back(sum);
    traj.rho_1.push_back(static_cast<double>(Nf));
    traj.pi_F.push_back(sum / static_cast<double>(Nf));
    traj.log_rho1.push_back(0.0);
    traj.ess.push_back(static_cast<double>(Nf));
  }

  std::size_t step = 0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < stride; ++j, ++step) {
      const MeasureSummary& mu = law->slow[step];
      const auto s32 = static_cast<std::uint32_t>(step);
      if (kind == SignalKind::Multiscale) {
        const MeasureSummary& nu = law->fast[step];
        parallel_for(Nf, [&](std::size_t b, std::size_t e) {
          step_slow_fast(model, mu, nu, plan, s32, b, e, xs, zs);
        });
        check_finite(zs, m, step, "filter fast");
      } else {
        drift->prepare(xs, n, mu);
        parallel_for(Nf, [&](std::size_t b, std::size_t e) {
          step_averaged(model, *drift, mu, plan, s32, b, e, xs);
        });
      }
      check_finite(xs, n, step, "filter slow");
    }

    const MeasureSummary& mu_now = law->slow[step];
    const Vec& dY = obs.increments[k];
    parallel_for(Nf, [&](std::size_t b, std::size_t e) {
      Vec h(l);
      for (std::size_t i = b; i < e; ++i) {
        model.h({xs.data() + i * n, n}, mu_now, h);
        logw[i] += log_likelihood_increment(h, dY, obs.dt);
        fval[i] = evaluate_functional(cfg.functional, {xs.data() + i * n, n}, mu_now);
      }
    });

    double top = -std::numeric_limits<double>::infinity();
    for (double v : logw) {
      if (std::isnan(v)) fail(ErrorCode::WeightCollapse, "log-weight is NaN at observation " +
                                                             std::to_string(k + 1));
      top = std::max(top, v);
    }
    if (!std::isfinite(top))
      fail(ErrorCode::WeightCollapse,
           "all log-weights are -inf at observation " + std::to_string(k + 1));

    double rho_1 = 0.0, rho_F = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < Nf; ++i) {
      unnorm[i] = std::exp(logw[i] - top);
      rho_1 += unnorm[i];
      rho_F += unnorm[i] * fval[i];
      sq += unnorm[i] * unnorm[i];
    }
    const double pi = rho_F / rho_1;
    const double log_rho1 = log_offset + top + std::log(rho_1 / static_cast<double>(Nf));
    const double ess = std::clamp(rho_1 * rho_1 / sq, 1.0, static_cast<double>(Nf));
    traj.pi_F.push_back(pi);
    traj.rho_F.push_back(rho_F);
    traj.rho_1.push_back(rho_1);
    traj.log_rho1.push_back(log_rho1);
    traj.ess.push_back(ess);

    if (ess < cfg.resample_threshold * static_cast<double>(Nf) && k + 1 < K) {
      const double u = resample_noise.uniform(0, 0, static_cast<std::uint32_t>(k), 0);
      const auto idx = systematic_indices(unnorm, u, Nf);
      std::vector<double> nx(Nf * n), nz(zs.size());
      double mean_f = 0.0;
      for (std::size_t i = 0; i < Nf; ++i) {
        std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                    nx.begin() + static_cast<std::ptrdiff_t>(i * n));
        if (!zs.empty())
          std::copy_n(zs.begin() + static_cast<std::ptrdiff_t>(idx[i] * m), m,
                      nz.begin() + static_cast<std::ptrdiff_t>(i * m));
        mean_f += fval[idx[i]];
      }
      xs.swap(nx);
      zs.swap(nz);
      std::fill(logw.begin(), logw.end(), 0.0);
      log_offset = log_rho1;
      traj.resample_events.push_back(k + 1);
      traj.pi_F_after_resample.push_back(mean_f / static_cast<double>(Nf));
    }
  }
  return traj;
}

MartingaleResult martingale_check(const ModelSpec& model, std::size_t mc_runs,
                                  const SdeConfig& sde_cfg, double dt) {
  if (mc_runs < 2) fail(ErrorCode::ValidationError, "mc_runs>=2 violated");
  SdeConfig cfg = sde_cfg;
  cfg.N = mc_runs;
  cfg.dt_macro = dt;
  const std::size_t n = model.n, l = model.l;
  const NoiseSource noise(sde_cfg.seed, "martingale/V");
  const double sqdt = std::sqrt(dt);
  std::vector<double> log_lambda(mc_runs, 0.0), h_prev(mc_runs * l, 0.0);

  run_slow_fast(model, cfg, [&](std::size_t step, std::span<const double> xs,
                                std::span<const double>) {
    const MeasureSummary mu = summarize_rows(xs, n);
    parallel_for(mc_runs, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::span<double> h(h_prev.data() + i * l, l);
        if (step > 0) {
          double inner = 0.0, sq = 0.0;
          for (std::size_t c = 0; c < l; ++c) {
            const double dV = sqdt * noise.normal(static_cast<std::uint32_t>(i),
                                                  static_cast<std::uint32_t>(c),
                                                  static_cast<std::uint32_t>(step - 1), 0);
            inner += h[c] * dV;
            sq += h[c] * h[c];
          }
          log_lambda[i] += -inner - 0.5 * sq * dt;
        }
        model.h(xs.subspan(i * n, n), mu, h);
      }
    });
  });

  double sum = 0.0, sum_sq = 0.0;
  for (double v : log_lambda) {
    const double e = std::exp(v);
    sum += e;
    sum_sq += e * e;
  }
  const double R = static_cast<double>(mc_runs);
  const double mean = sum / R;
  const double var = std::max(0.0, (sum_sq - R * mean * mean) / (R - 1.0));
  return {mean, std::sqrt(var / R), mc_runs};
}

namespace {

struct KalmanModel {
  double A = 1.0;  // transition over one observation step
  double Q = 0.0;  // process variance over one observation step
  double H = 0.0;  // hscale * obs_dt
  double R = 0.0;  // obs_dt
};

KalmanModel kalman_model(const LinearModelParams& p, double obs_dt, std::size_t stride) {
  if (stride == 0) fail(ErrorCode::GridMismatch, "observation stride must be positive");
  const double delta = obs_dt / static_cast<double>(stride);
  const double a = 1.0 + p.a11 * delta;
  KalmanModel km;
  for (std::size_t j = 0; j < stride; ++j) {
    km.A *= a;
    km.Q = a * a * km.Q + p.s1 * p.s1 * delta;
  }
  km.H = p.hscale * obs_dt;
  km.R = obs_dt;
  return km;
}

void require_kalman_case(const LinearModelParams& p) {
  if (p.a12 != 0.0 || p.a13 != 0.0 || p.sensor != SensorKind::Linear)
    fail(ErrorCode::UnsupportedModel,
         "Kalman oracle needs a12 = a13 = 0 and a linear sensor");
}

}  // namespace

KalmanSeries kalman_oracle(const LinearModelParams& params, double x0, const ObservationPath& obs) {
  require_kalman_case(params);
  for (const auto& dY : obs.increments)
    if (dY.size() != 1) fail(ErrorCode::UnsupportedModel, "Kalman oracle needs l = 1");
  if (obs.times.size() != obs.increments.size() + 1)
    fail(ErrorCode::GridMismatch, "observation times and increments disagree");

  const KalmanModel km = kalman_model(params, obs.dt, obs.stride);
  KalmanSeries out;
  out.times = obs.times;
  double mean = x0, var = 0.0;
  out.mean.push_back(mean);
  out.variance.push_back(var);
  for (const auto& dY : obs.increments) {
    mean = km.A * mean;
    var = km.A * km.A * var + km.Q;
    const double S = km.H * km.H * var + km.R;
    const double gain = var * km.H / S;
    mean = mean + gain * (dY[0] - km.H * mean);
    var = (1.0 - gain * km.H) * var;
    out.mean.push_back(mean);
    out.variance.push_back(var);
  }
  return out;
}

double kalman_stationary_variance(const LinearModelParams& params, double obs_dt,
                                  std::size_t stride) {
  require_kalman_case(params);
  const KalmanModel km = kalman_model(params, obs_dt, stride);
  const double A2 = km.A * km.A, H2 = km.H * km.H;
  if (H2 == 0.0) {
    if (A2 >= 1.0) fail(ErrorCode::Instability, "no stationary variance without observations");
    return km.Q / (1.0 - A2);
  }
  // Prior variance P solves H2 P^2 + (R (1 - A2) - Q H2) P - Q R = 0.
  const double b = km.R * (1.0 - A2) - km.Q * H2;
  const double prior = (-b + std::sqrt(b * b + 4.0 * H2 * km.Q * km.R)) / (2.0 * H2);
  return prior * km.R / (H2 * prior + km.R);
}

FilterDiscrepancy filter_discrepancy(const FilterTrajectory& a, const FilterTrajectory& b,
                                     double p) {
  if (a.pi_F.size() != b.pi_F.size() || a.times != b.times || a.pi_F.empty())
    fail(ErrorCode::GridMismatch, "filter trajectories do not share a time grid");
  if (!(p > 0.0)) fail(ErrorCode::ValidationError, "p>0 violated");
  FilterDiscrepancy d;
  d.per_time.reserve(a.pi_F.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < a.pi_F.size(); ++k) {
    const double v = std::pow(std::abs(a.pi_F[k] - b.pi_F[k]), p);
    d.per_time.push_back(v);
    sum += v;
  }
  d.terminal = d.per_time.back();
  d.average = sum / static_cast<double>(d.per_time.size());
  return d;
}

void write_observations_csv(std::ostream& os, const ObservationPath& obs) {
  os << "time";
  const std::size_t l = obs.increments.empty() ? 0 : obs.increments.front().size();
  for (std::size_t c = 0; c < l; ++c) os << ",dY" << c;
  os << '\n';
  for (std::size_t k = 0; k < obs.increments.size(); ++k) {
    os << fmt17(obs.times[k + 1]);
    for (double v : obs.increments[k]) os << ',' << fmt17(v);
    os << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const FilterTrajectory& traj) {
  os << "time,pi_F,log_rho1,ess\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    os << fmt17(traj.times[k]) << ',' << fmt17(traj.pi_F[k]) << ',' << fmt17(traj.log_rho1[k])
       << ',' << fmt17(traj.ess[k]) << '\n';
}

}  // namespace mvx
