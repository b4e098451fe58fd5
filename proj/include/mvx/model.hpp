// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mvx/measure.hpp"

namespace mvx {

using Vec = std::vector<double>;

// Coefficient callables write into caller-provided buffers. Matrices are
// row-major. Laws enter only through MeasureSummary.
using SlowDrift = std::function<void(std::span<const double> x, const MeasureSummary& mu,
                                     std::span<const double> z, std::span<double> out)>;
using SlowDiffusion =
    std::function<void(std::span<const double> x, const MeasureSummary& mu, std::span<double> out)>;
using FastDrift =
    std::function<void(std::span<const double> x, const MeasureSummary& mu,
                       std::span<const double> z, const MeasureSummary& nu, std::span<double> out)>;
using FastDiffusion = FastDrift;
using Sensor = SlowDiffusion;

enum class SensorKind { Tanh, Linear };

struct LinearModelParams {
  // b1 = a11 x + a12 mean(mu) + a13 z
  double a11 = -1.0;
  double a12 = 0.0;
  double a13 = 1.0;
  double s1 = 0.5;
  // b2 = -gamma z + c1 x + c2 mean(mu) + c3 mean(nu)
  double gamma = 2.0;
  double c1 = 1.0;
  double c2 = 0.0;
  double c3 = 0.5;
  double s2 = 1.0;
  // Tanh: h = tanh(hscale x) + tanh(hscale mean(mu)); Linear: h = hscale x.
  double hscale = 1.0;
  SensorKind sensor = SensorKind::Tanh;

  friend bool operator==(const LinearModelParams&, const LinearModelParams&) = default;
};

/// Immutable problem definition: coefficients of the slow-fast system,
/// dimensions and initial data. Safe to evaluate concurrently.
struct ModelSpec {
  std::size_t n = 1;  // slow
  std::size_t m = 1;  // fast
  std::size_t l = 1;  // observation
  Vec x0;
  Vec z0;
  SlowDrift b1;
  SlowDiffusion sigma1;
  FastDrift b2;
  FastDiffusion sigma2;
  Sensor h;
  double h_bound = 0.0;         // declared sup |h|
  double fast_stiffness = 1.0;  // Lipschitz constant of b2 in z
  std::optional<LinearModelParams> linear;
};

ModelSpec make_linear_model(const LinearModelParams& params, std::size_t n, std::size_t m,
                            std::size_t l, Vec x0, Vec z0);

struct CoefficientValues {
  Vec b1, sigma1, b2, sigma2, h;
};

CoefficientValues eval_coefficients(const ModelSpec& model, std::span<const double> x,
                                    const MeasureSummary& mu, std::span<const double> z,
                                    const MeasureSummary& nu);

struct ProbeBox {
  double lo = -2.0;
  double hi = 2.0;
};

struct AssumptionProbeReport {
  double lipschitz_b1s1 = 0.0;
  double lipschitz_b2s2 = 0.0;
  double lipschitz_h = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double p = 1.0;
  double margin = 0.0;  // beta1/p - beta2 - 2 L_{b2,sigma2}
  double h_bound = 0.0;
  double fast_stiffness = 0.0;
  std::size_t sample_count = 0;
  ProbeBox domain_box;
};

/// Empirical Lipschitz and dissipativity constants over random pairs drawn
/// in domain_box. The law distance is replaced by |mean difference|.
/// The cross term of the dissipativity inequality is split with Young's
/// inequality at unit weight, so for b2 = -gamma z + c3 mean(nu) the report
/// gives beta1 = 2 gamma - c3 and beta2 = c3.
AssumptionProbeReport probe_assumptions(const ModelSpec& model, std::size_t sample_count,
                                        ProbeBox domain_box, double p,
                                        std::uint64_t seed = 0x5eed);

/// Default burn-in 5 / (beta1 - beta2). Uses exact constants for the linear
/// model and a p = 1 probe otherwise.
double default_burn_in(const ModelSpec& model);

}  // namespace mvx
