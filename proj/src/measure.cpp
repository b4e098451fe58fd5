// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "mvx/error.hpp"
#include "mvx/io.hpp"

namespace mvx {

namespace {

void check_points(const std::vector<double>& points, std::size_t dim) {
  if (dim == 0) fail(ErrorCode::DimensionMismatch, "particle cloud dimension must be positive");
  if (points.empty() || points.size() % dim != 0)
    fail(ErrorCode::DimensionMismatch,
         "particle cloud needs N >= 1 points of dimension " + std::to_string(dim));
  for (double v : points)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteResult, "particle coordinate is not finite");
}

}  // namespace

ParticleCloud::ParticleCloud(std::vector<double> points, std::size_t dim)
    : points_(std::move(points)), dim_(dim) {
  check_points(points_, dim_);
  const std::size_t n = points_.size() / dim_;
  weights_.assign(n, 1.0 / static_cast<double>(n));
}

ParticleCloud::ParticleCloud(std::vector<double> points, std::vector<double> weights,
                             std::size_t dim)
    : points_(std::move(points)), weights_(std::move(weights)), dim_(dim), uniform_(false) {
  check_points(points_, dim_);
  if (weights_.size() * dim_ != points_.size())
    fail(ErrorCode::DimensionMismatch, "weight count does not match particle count");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w))
      fail(ErrorCode::InvalidParams, "particle weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    fail(ErrorCode::InvalidParams, "particle weights must sum to 1");
}

ParticleCloud ParticleCloud::dirac(std::span<const double> point, std::size_t count) {
  std::vector<double> pts;
  pts.reserve(point.size() * count);
  for (std::size_t i = 0; i < count; ++i) pts.insert(pts.end(), point.begin(), point.end());
  return ParticleCloud(std::move(pts), point.size());
}

MeasureSummary MeasureSummary::dirac(std::span<const double> point) {
  MeasureSummary s;
  s.mean.assign(point.begin(), point.end());
  for (double v : point) s.second_moment += v * v;
  s.n_points = 1;
  return s;
}

MeasureSummary MeasureSummary::from_moments(std::vector<double> mean, double second_moment) {
  MeasureSummary s;
  double sq = 0.0;
  for (double v : mean) sq += v * v;
  s.mean = std::move(mean);
  s.second_moment = std::max(second_moment, sq);
  s.n_points = 0;
  return s;
}

MeasureSummary summarize(const ParticleCloud& cloud) {
  MeasureSummary s;
  const std::size_t d = cloud.dim();
  s.mean.assign(d, 0.0);
  s.n_points = cloud.size();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double w = cloud.weight(i);
    const auto x = cloud.point(i);
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      s.mean[k] += w * x[k];
      sq += x[k] * x[k];
    }
    s.second_moment += w * sq;
  }
  double mean_sq = 0.0;
  for (double v : s.mean) mean_sq += v * v;
  // Rounding can push the weighted second moment a hair below |mean|^2.
  s.second_moment = std::max(s.second_moment, mean_sq);
  return s;
}

double integrate(const ParticleCloud& cloud,
                 const std::function<double(std::span<const double>)>& phi) {
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double v = phi(cloud.point(i));
    if (!std::isfinite(v))
      fail(ErrorCode::NonFiniteResult,
           "test function is not finite at particle " + std::to_string(i));
    total += cloud.weight(i) * v;
  }
  return total;
}

double wasserstein1(std::span<const double> a, std::span<const double> a_weights,
                    std::span<const double> b, std::span<const double> b_weights) {
  // Integral of |F_a - F_b| over the merged support.
  struct Atom {
    double x;
    double dw;  // +w for a, -w for b
  };
  std::vector<Atom> atoms;
  atoms.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) atoms.push_back({a[i], a_weights[i]});
  for (std::size_t i = 0; i < b.size(); ++i) atoms.push_back({b[i], -b_weights[i]});
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.x < r.x; });
  double cdf_gap = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    cdf_gap += atoms[i].dw;
    total += std::abs(cdf_gap) * (atoms[i + 1].x - atoms[i].x);
  }
  return total;
}

double rho_estimate(const ParticleCloud& a, const ParticleCloud& b, double blend) {
  if (a.dim() != b.dim())
    fail(ErrorCode::DimensionMismatch, "rho_estimate: clouds have different dimensions");
  const std::size_t d = a.dim();
  double total = 0.0;
  std::vector<double> ca(a.size()), cb(b.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < a.size(); ++i) ca[i] = a.point(i)[k];
    for (std::size_t i = 0; i < b.size(); ++i) cb[i] = b.point(i)[k];
    total += wasserstein1(ca, a.weights(), cb, b.weights());
  }
  if (d > 1 && blend != 0.0)
    total += blend * std::abs(summarize(a).second_moment - summarize(b).second_moment);
  return total;
}

std::vector<std::size_t> systematic_indices(std::span<const double> weights, double u,
                                            std::size_t count) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    fail(ErrorCode::DegenerateWeights, "systematic resampling: weights sum to zero");
  std::vector<std::size_t> out(count);
  const double step = total / static_cast<double>(count);
  double position = u * step;
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < count; ++i) {
    while (position > cumulative && j + 1 < weights.size()) cumulative += weights[++j];
    out[i] = j;
    position += step;
  }
  return out;
}

ParticleCloud systematic_resample(const ParticleCloud& cloud, Stream& rng) {
  const auto idx = systematic_indices(cloud.weights(), rng.uniform(), cloud.size());
  std::vector<double> pts;
  pts.reserve(cloud.points().size());
  for (std::size_t j : idx) {
    const auto p = cloud.point(j);
    pts.insert(pts.end(), p.begin(), p.end());
  }
  return ParticleCloud(std::move(pts), cloud.dim());
}

void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud) {
  os << "weight";
  for (std::size_t k = 0; k < cloud.dim(); ++k) os << ",x" << k;
  os << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    os << fmt17(cloud.weight(i));
    for (double v : cloud.point(i)) os << ',' << fmt17(v);
    os << '\n';
  }
}

}  // namespace mvx
