// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mvx/rng.hpp"

namespace mvx {

/// Empirical measure: N weighted points in R^d, stored row-major.
class ParticleCloud {
 public:
  ParticleCloud() = default;

  /// Uniform weights 1/N.
  ParticleCloud(std::vector<double> points, std::size_t dim);
  ParticleCloud(std::vector<double> points, std::vector<double> weights, std::size_t dim);

  /// N copies of one point.
  static ParticleCloud dirac(std::span<const double> point, std::size_t count);

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> point(std::size_t i) const noexcept {
    return {points_.data() + i * dim_, dim_};
  }
  double weight(std::size_t i) const noexcept { return weights_[i]; }

  const std::vector<double>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  bool uniform_weights() const noexcept { return uniform_; }

  friend bool operator==(const ParticleCloud&, const ParticleCloud&) = default;

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
  std::size_t dim_ = 0;
  bool uniform_ = true;
};

/// Moment summary through which laws enter model coefficients.
struct MeasureSummary {
  std::vector<double> mean;
  double second_moment = 0.0;  // integral of |x|^2
  std::size_t n_points = 0;
  // Optional full cloud for coefficients that integrate arbitrary test
  // functions. Non-owning; valid only for the duration of a coefficient call.
  const ParticleCloud* cloud = nullptr;

  std::size_t dim() const noexcept { return mean.size(); }

  static MeasureSummary dirac(std::span<const double> point);
  /// Summary with the given mean and second moment max(second_moment, |mean|^2).
  static MeasureSummary from_moments(std::vector<double> mean, double second_moment);
};

MeasureSummary summarize(const ParticleCloud& cloud);

/// Sum of w_i * phi(x_i). Throws NonFiniteResult if any phi(x_i) is not finite.
double integrate(const ParticleCloud& cloud,
                 const std::function<double(std::span<const double>)>& phi);

/// Empirical 1-Wasserstein distance between two weighted samples on the line.
double wasserstein1(std::span<const double> a, std::span<const double> a_weights,
                    std::span<const double> b, std::span<const double> b_weights);

/// Computable stand-in for the metric on P_2 ("W1-surrogate"): exact W1 in
/// d = 1; in d > 1 the sum of marginal W1 distances plus
/// blend * | ||a||^2 - ||b||^2 |.
double rho_estimate(const ParticleCloud& a, const ParticleCloud& b, double blend = 0.0);

/// Systematic resampling offspring indices for normalized or unnormalized
/// weights, using the single offset u in (0, 1).
std::vector<std::size_t> systematic_indices(std::span<const double> weights, double u,
                                            std::size_t count);

ParticleCloud systematic_resample(const ParticleCloud& cloud, Stream& rng);

/// CSV rows "weight,x_1,...,x_d" with 17 significant digits.
void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud);

}  // namespace mvx
