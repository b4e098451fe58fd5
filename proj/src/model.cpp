// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvx/error.hpp"
#include "mvx/rng.hpp"

namespace mvx {

ModelSpec make_linear_model(const LinearModelParams& p, std::size_t n, std::size_t m,
                            std::size_t l, Vec x0, Vec z0) {
  if (!(p.gamma > 0.0)) fail(ErrorCode::InvalidParams, "gamma>0 violated");
  if (!(p.gamma > p.c3)) fail(ErrorCode::InvalidParams, "gamma>c3 violated");
  if (n == 0 || m != n || l == 0 || l > n)
    fail(ErrorCode::DimensionMismatch, "linear model needs m == n and 1 <= l <= n");
  if (x0.size() != n || z0.size() != m)
    fail(ErrorCode::DimensionMismatch, "initial data does not match model dimensions");

  ModelSpec model;
  model.n = n;
  model.m = m;
  model.l = l;
  model.x0 = std::move(x0);
  model.z0 = std::move(z0);
  model.linear = p;
  model.fast_stiffness = p.gamma;

  model.b1 = [p](std::span<const double> x, const MeasureSummary& mu, std::span<const double> z,
                 std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = p.a11 * x[i] + p.a12 * mu.mean[i] + p.a13 * z[i];
  };
  model.sigma1 = [p, n](std::span<const double>, const MeasureSummary&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) out[i * n + i] = p.s1;
  };
  model.b2 = [p](std::span<const double> x, const MeasureSummary& mu, std::span<const double> z,
                 const MeasureSummary& nu, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = -p.gamma * z[i] + p.c1 * x[i] + p.c2 * mu.mean[i] + p.c3 * nu.mean[i];
  };
  model.sigma2 = [p, m](std::span<const double>, const MeasureSummary&, std::span<const double>,
                        const MeasureSummary&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) out[i * m + i] = p.s2;
  };
  if (p.sensor == SensorKind::Tanh) {
    model.h = [p](std::span<const double> x, const MeasureSummary& mu, std::span<double> out) {
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::tanh(p.hscale * x[i]) + std::tanh(p.hscale * mu.mean[i]);
    };
    model.h_bound = p.hscale == 0.0 ? 0.0 : 2.0 * std::sqrt(static_cast<double>(l));
  } else {
    model.h = [p](std::span<const double> x, const MeasureSummary&, std::span<double> out) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.hscale * x[i];
    };
    model.h_bound = p.hscale == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return model;
}

CoefficientValues eval_coefficients(const ModelSpec& model, std::span<const double> x,
                                    const MeasureSummary& mu, std::span<const double> z,
                                    const MeasureSummary& nu) {
  if (x.size() != model.n || mu.dim() != model.n || z.size() != model.m || nu.dim() != model.m)
    fail(ErrorCode::DimensionMismatch, "eval_coefficients: argument dimensions do not match model");
  CoefficientValues v;
  v.b1.resize(model.n);
  v.sigma1.resize(model.n * model.n);
  v.b2.resize(model.m);
  v.sigma2.resize(model.m * model.m);
  v.h.resize(model.l);
  model.b1(x, mu, z, v.b1);
  model.sigma1(x, mu, v.sigma1);
  model.b2(x, mu, z, nu, v.b2);
  model.sigma2(x, mu, z, nu, v.sigma2);
  model.h(x, mu, v.h);
  return v;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double sq_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double dot_diff(std::span<const double> a1, std::span<const double> a2,
                std::span<const double> b1, std::span<const double> b2) {
  double s = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) s += (a1[i] - a2[i]) * (b1[i] - b2[i]);
  return s;
}

struct ProbeSampler {
  NoiseSource source;
  double lo, hi;
  std::uint32_t sample = 0;
  std::uint32_t slot = 0;

  double unit() { return source.uniform(sample, slot++, 0, 0); }
  double next() { return lo + (hi - lo) * unit(); }
  Vec vec(std::size_t d) {
    Vec v(d);
    for (auto& x : v) x = next();
    return v;
  }
  MeasureSummary summary(std::size_t d) {
    Vec mean = vec(d);
    const double spread = 0.25 * (hi - lo) * (hi - lo) * unit();
    double sq = 0.0;
    for (double v : mean) sq += v * v;
    return MeasureSummary::from_moments(std::move(mean), sq + spread);
  }
};

}  // namespace

AssumptionProbeReport probe_assumptions(const ModelSpec& model, std::size_t sample_count,
                                        ProbeBox box, double p, std::uint64_t seed) {
  if (sample_count < 2) fail(ErrorCode::InvalidParams, "probe needs sample_count >= 2");
  if (!(box.hi > box.lo)) fail(ErrorCode::InvalidParams, "probe domain box is degenerate");
  if (!(p >= 1.0)) fail(ErrorCode::InvalidParams, "probe moment order p must be >= 1");

  const std::size_t n = model.n, m = model.m, l = model.l;
  AssumptionProbeReport r;
  r.p = p;
  r.sample_count = sample_count;
  r.domain_box = box;

  double beta1_raw = std::numeric_limits<double>::infinity();
  double cross = 0.0;
  constexpr double tiny = 1e-12;

  Vec b1a(n), b1b(n), s1a(n * n), s1b(n * n);
  Vec b2a(m), b2b(m), b2c(m), s2a(m * m), s2b(m * m), s2c(m * m);
  Vec ha(l), hb(l);

  ProbeSampler sampler{NoiseSource(seed, "probe"), box.lo, box.hi};
  for (std::size_t s = 0; s < sample_count; ++s) {
    sampler.sample = static_cast<std::uint32_t>(s);
    sampler.slot = 0;
    const Vec x1 = sampler.vec(n), x2 = sampler.vec(n);
    const Vec z1 = sampler.vec(m), z2 = sampler.vec(m);
    const MeasureSummary mu1 = sampler.summary(n), mu2 = sampler.summary(n);
    const MeasureSummary nu1 = sampler.summary(m), nu2 = sampler.summary(m);
    const double dx = sq_dist(x1, x2), dz = sq_dist(z1, z2);
    const double dmu = sq_dist(mu1.mean, mu2.mean), dnu = sq_dist(nu1.mean, nu2.mean);

    model.b1(x1, mu1, z1, b1a);
    model.b1(x2, mu2, z2, b1b);
    model.sigma1(x1, mu1, s1a);
    model.sigma1(x2, mu2, s1b);
    if (dx + dmu + dz > tiny)
      r.lipschitz_b1s1 = std::max(r.lipschitz_b1s1,
                                  (sq_dist(b1a, b1b) + sq_dist(s1a, s1b)) / (dx + dmu + dz));

    model.b2(x1, mu1, z1, nu1, b2a);
    model.b2(x2, mu2, z2, nu2, b2b);
    model.sigma2(x1, mu1, z1, nu1, s2a);
    model.sigma2(x2, mu2, z2, nu2, s2b);
    if (dx + dmu + dz + dnu > tiny)
      r.lipschitz_b2s2 = std::max(
          r.lipschitz_b2s2, (sq_dist(b2a, b2b) + sq_dist(s2a, s2b)) / (dx + dmu + dz + dnu));

    // Dissipativity at frozen (x1, mu1): self part with a shared nu, then
    // the cross part from switching the second law to nu2.
    if (dz > tiny) {
      model.b2(x1, mu1, z1, nu1, b2a);
      model.b2(x1, mu1, z2, nu1, b2b);
      model.sigma2(x1, mu1, z1, nu1, s2a);
      model.sigma2(x1, mu1, z2, nu1, s2b);
      const double self = 2.0 * dot_diff(z1, z2, b2a, b2b) + (2.0 * p - 1.0) * sq_dist(s2a, s2b);
      beta1_raw = std::min(beta1_raw, -self / dz);
      r.fast_stiffness = std::max(r.fast_stiffness, std::sqrt(sq_dist(b2a, b2b) / dz));

      model.b2(x1, mu1, z2, nu2, b2c);
      model.sigma2(x1, mu1, z2, nu2, s2c);
      const double full = 2.0 * dot_diff(z1, z2, b2a, b2c) + (2.0 * p - 1.0) * sq_dist(s2a, s2c);
      if (dnu > tiny)
        cross = std::max(cross, std::abs(full - self) / std::sqrt(dz * dnu));
    }

    model.h(x1, mu1, ha);
    model.h(x2, mu2, hb);
    r.h_bound = std::max({r.h_bound, std::sqrt(sq_norm(ha)), std::sqrt(sq_norm(hb))});
    if (dx + dmu > tiny) r.lipschitz_h = std::max(r.lipschitz_h, sq_dist(ha, hb) / (dx + dmu));
  }

  r.beta2 = 0.5 * cross;
  r.beta1 = (std::isfinite(beta1_raw) ? beta1_raw : 0.0) - r.beta2;
  r.margin = r.beta1 / p - r.beta2 - 2.0 * r.lipschitz_b2s2;
  return r;
}

double default_burn_in(const ModelSpec& model) {
  double gap = 0.0;
  if (model.linear) {
    const auto& p = *model.linear;
    gap = 2.0 * p.gamma - 2.0 * std::abs(p.c3);
  } else {
    const auto r = probe_assumptions(model, 512, ProbeBox{}, 1.0);
    gap = r.beta1 - r.beta2;
  }
  if (!(gap > 0.0)) gap = model.fast_stiffness;
  return 5.0 / gap;
}

}  // namespace mvx
