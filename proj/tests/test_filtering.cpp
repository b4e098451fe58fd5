// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mvx/averaging.hpp"
#include "mvx/error.hpp"
#include "mvx/filtering.hpp"

using namespace mvx;

namespace {

ModelSpec scalar(LinearModelParams p = {}, double x0 = 0.5) {
  return make_linear_model(p, 1, 1, 1, {x0}, {0.0});
}

SdeConfig signal_cfg(double T = 1.0, double dt = 0.01, std::size_t N = 200) {
  SdeConfig cfg;
  cfg.N = N;
  cfg.T = T;
  cfg.dt_macro = dt;
  cfg.epsilon = 0.05;
  return cfg;
}

LinearModelParams kalman_params(double hscale = 1.0) {
  LinearModelParams p;
  p.a12 = p.a13 = p.c2 = p.c3 = 0.0;
  p.sensor = SensorKind::Linear;
  p.hscale = hscale;
  return p;
}

FilterTrajectory constant_trajectory(std::vector<double> pi) {
  FilterTrajectory t;
  for (std::size_t i = 0; i < pi.size(); ++i) t.times.push_back(0.1 * static_cast<double>(i));
  t.pi_F = std::move(pi);
  return t;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("log-likelihood increment examples") {
  CHECK(log_likelihood_increment(Vec{0.0}, Vec{0.3}, 0.01) == 0.0);
  CHECK(log_likelihood_increment(Vec{1.0}, Vec{0.1}, 0.01) == doctest::Approx(0.095).epsilon(1e-14));
  CHECK(log_likelihood_increment(Vec{2.0}, Vec{0.0}, 0.01) == doctest::Approx(-0.02).epsilon(1e-14));
  CHECK(log_likelihood_increment(Vec{1.0, 2.0}, Vec{0.5, 0.25}, 0.1) ==
        doctest::Approx(0.5 + 0.5 - 0.25).epsilon(1e-14));
}

TEST_CASE("functionals") {
  const auto mu = MeasureSummary::from_moments({0.5}, 1.0);
  CHECK(evaluate_functional(FunctionalKind::One, Vec{3.0}, mu) == 1.0);
  CHECK(evaluate_functional(FunctionalKind::Identity, Vec{3.0}, mu) == 3.0);
  CHECK(evaluate_functional(FunctionalKind::Tanh, Vec{3.0}, mu) ==
        doctest::Approx(std::tanh(3.0) + std::tanh(0.5)));
  const auto mu2 = MeasureSummary::from_moments({1.0, 1.0}, 2.0);
  CHECK(evaluate_functional(FunctionalKind::Tanh, Vec{1.0, -1.0}, mu2) ==
        doctest::Approx(std::tanh(2.0 / std::sqrt(2.0))));
  for (auto kind : {FunctionalKind::One, FunctionalKind::Identity, FunctionalKind::Tanh})
    CHECK(functional_from_name(functional_name(kind)) == kind);
  CHECK(code_of([] { functional_from_name("cubic"); }) == ErrorCode::ValidationError);
}

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.Nf = 5;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.resample_threshold = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.p = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("observation errors") {
  const ModelSpec model = scalar();
  const auto signal = simulate_slow_fast(model, signal_cfg(1.0, 0.01, 3));
  CHECK(code_of([&] { generate_observations(model, signal, 3, 0.01, 1); }) ==
        ErrorCode::IndexOutOfRange);
  CHECK(code_of([&] { generate_observations(model, signal, 0, 0.015, 1); }) ==
        ErrorCode::GridMismatch);
  CHECK(code_of([&] { generate_observations(model, signal, 0, 0.03, 1); }) ==
        ErrorCode::GridMismatch);
  const auto coarse = generate_observations(model, signal, 0, 0.05, 1);
  CHECK(coarse.stride == 5);
  CHECK(coarse.increments.size() == 20);
  CHECK(coarse.times.back() == signal.times.back());
}

TEST_CASE("observations without a sensor signal are Brownian") {
  LinearModelParams p;
  p.hscale = 0.0;
  const ModelSpec model = scalar(p);
  const auto signal = simulate_slow_fast(model, signal_cfg(1.0, 1e-3, 2));
  const auto obs = generate_observations(model, signal, 1, 1e-3, 5);
  double qv = 0.0;
  for (const auto& dY : obs.increments) qv += dY[0] * dY[0];
  CHECK(qv >= 0.9);
  CHECK(qv <= 1.1);
}

TEST_CASE("halving the observation step halves the noise variance") {
  LinearModelParams p;
  p.hscale = 0.0;
  const ModelSpec model = scalar(p);
  const auto signal = simulate_slow_fast(model, signal_cfg(20.0, 0.005, 2));
  auto variance = [&](double dt, std::uint64_t seed) {
    const auto obs = generate_observations(model, signal, 0, dt, seed);
    double s = 0, ss = 0;
    for (const auto& dY : obs.increments) {
      s += dY[0];
      ss += dY[0] * dY[0];
    }
    const double n = static_cast<double>(obs.increments.size());
    return std::pair{ss / n - (s / n) * (s / n), n};
  };
  const auto [coarse, n1] = variance(0.01, 11);
  const auto [fine, n2] = variance(0.005, 12);
  const double ratio = coarse / fine;
  const double sigma = 2.0 * std::sqrt(2.0 / n1 + 2.0 / n2);
  CHECK(std::abs(ratio - 2.0) <= 3.0 * sigma);
}

TEST_CASE("bounded sensor moves increments by at most H dt") {
  LinearModelParams quiet;
  quiet.hscale = 0.0;
  const LinearModelParams loud;
  const ModelSpec a = scalar(quiet), b = scalar(loud);
  const auto signal = simulate_slow_fast(b, signal_cfg(1.0, 0.01, 4));
  const auto noise = generate_observations(a, signal, 2, 0.01, 9);
  const auto obs = generate_observations(b, signal, 2, 0.01, 9);
  for (std::size_t k = 0; k < obs.increments.size(); ++k)
    CHECK(std::abs(obs.increments[k][0]) <=
          std::abs(noise.increments[k][0]) + b.h_bound * obs.dt + 1e-15);
}

TEST_CASE("normalization and Kallianpur-Striebel identity") {
  const ModelSpec model = scalar();
  const SdeConfig cfg = signal_cfg(0.5, 0.01, 50);
  const auto signal = simulate_slow_fast(model, cfg);
  const auto obs = generate_observations(model, signal, 0, 0.01, 3);
  const auto oracle = make_drift_oracle(model, OracleMode::AnalyticLinear, {}, 0.05);
  for (auto kind : {SignalKind::Multiscale, SignalKind::Averaged}) {
    FilterConfig one;
    one.Nf = 300;
    one.functional = FunctionalKind::One;
    one.resample_threshold = 1.0;
    const auto t1 = run_filter(kind, model, &oracle, obs, one, cfg);
    for (double v : t1.pi_F) CHECK(v == 1.0);
    CHECK(!t1.resample_events.empty());

    FilterConfig tanh = one;
    tanh.functional = FunctionalKind::Tanh;
    const auto t2 = run_filter(kind, model, &oracle, obs, tanh, cfg);
    for (std::size_t k = 0; k < t2.pi_F.size(); ++k) {
      CHECK(t2.pi_F[k] == t2.rho_F[k] / t2.rho_1[k]);
      CHECK(t2.ess[k] >= 1.0);
      CHECK(t2.ess[k] <= 300.0 * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("zero sensor leaves weights uniform") {
  LinearModelParams p;
  p.hscale = 0.0;
  const ModelSpec model = scalar(p);
  const SdeConfig cfg = signal_cfg(0.5, 0.01, 2000);
  const auto signal = simulate_slow_fast(model, cfg);
  const auto obs = generate_observations(model, signal, 0, 0.01, 3);
  FilterConfig fc;
  fc.Nf = 2000;
  const auto traj = run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, cfg);
  CHECK(traj.resample_events.empty());
  for (std::size_t k = 0; k < traj.pi_F.size(); ++k) {
    CHECK(traj.log_rho1[k] == 0.0);
    CHECK(traj.ess[k] == doctest::Approx(2000.0).epsilon(1e-12));
    CHECK(traj.pi_F[k] == traj.rho_F[k] / 2000.0);
  }
  // The unweighted filter ensemble is a fresh sample of the prior.
  const auto& law = obs.signal_law_trace;
  double prior = 0.0;
  for (std::size_t i = 0; i < cfg.N; ++i)
    prior += evaluate_functional(fc.functional, signal.slow.back().point(i), law.slow.back());
  prior /= static_cast<double>(cfg.N);
  CHECK(std::abs(traj.pi_F.back() - prior) <= 0.05);
}

TEST_CASE("filter grid errors") {
  const ModelSpec model = scalar();
  const SdeConfig cfg = signal_cfg(0.5, 0.01, 20);
  const auto obs = generate_observations(model, simulate_slow_fast(model, cfg), 0, 0.01, 3);
  FilterConfig fc;
  fc.Nf = 50;
  SdeConfig longer = cfg;
  longer.T = 1.0;
  CHECK(code_of([&] { run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, longer); }) ==
        ErrorCode::GridMismatch);
  SdeConfig coarser = cfg;
  coarser.dt_macro = 0.05;
  CHECK(code_of([&] { run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, coarser); }) ==
        ErrorCode::GridMismatch);
}

TEST_CASE("resampling is unbiased") {
  const ModelSpec model = scalar();
  const SdeConfig base = signal_cfg(0.1, 0.01, 20);
  const auto obs = generate_observations(model, simulate_slow_fast(model, base), 0, 0.01, 3);
  FilterConfig fc;
  fc.Nf = 50;
  fc.resample_threshold = 1.0;
  double sum = 0.0, sum_sq = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    SdeConfig cfg = base;
    cfg.seed = 1000 + static_cast<std::uint64_t>(s);
    const auto traj = run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, cfg);
    REQUIRE(!traj.resample_events.empty());
    const std::size_t k = traj.resample_events.front();
    const double d = traj.pi_F_after_resample.front() - traj.pi_F[k];
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt((sum_sq / seeds - mean * mean) / (seeds - 1));
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("Girsanov martingale") {
  LinearModelParams p;
  p.hscale = 0.0;
  SdeConfig cfg = signal_cfg(1.0, 0.01, 2);
  const auto flat = martingale_check(scalar(p), 100, cfg, 0.01);
  CHECK(flat.mean == 1.0);
  CHECK(flat.std_error == 0.0);
  CHECK(flat.runs == 100);

  const ModelSpec model = scalar();
  const auto coarse = martingale_check(model, 2000, cfg, 1e-3);
  CHECK(std::abs(coarse.mean - 1.0) <= 3.0 * coarse.std_error);
  const auto fine = martingale_check(model, 2000, cfg, 1e-4);
  CHECK(std::abs(fine.mean - 1.0) <= std::abs(coarse.mean - 1.0) + 3.0 * fine.std_error);
  CHECK(code_of([&] { martingale_check(model, 1, cfg, 1e-3); }) == ErrorCode::ValidationError);
}

TEST_CASE("Kalman oracle with zero gain returns prior moments") {
  const LinearModelParams p = kalman_params(0.0);
  const ModelSpec model = scalar(p, 1.0);
  const SdeConfig cfg = signal_cfg(1.0, 0.01, 2);
  const auto obs = generate_observations(model, simulate_slow_fast(model, cfg), 0, 0.02, 4);
  const auto kf = kalman_oracle(p, 1.0, obs);
  // Euler prior over one observation step of two substeps.
  const double a = 1.0 + p.a11 * 0.01;
  double mean = 1.0, var = 0.0;
  for (std::size_t k = 1; k < kf.mean.size(); ++k) {
    for (int s = 0; s < 2; ++s) {
      mean *= a;
      var = a * a * var + p.s1 * p.s1 * 0.01;
    }
    CHECK(kf.mean[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(kf.variance[k] == doctest::Approx(var).epsilon(1e-12));
  }
}

TEST_CASE("Kalman variance reaches the Riccati fixed point") {
  const LinearModelParams p = kalman_params(2.0);
  const ModelSpec model = scalar(p, 0.0);
  const SdeConfig cfg = signal_cfg(20.0, 0.01, 2);
  const auto obs = generate_observations(model, simulate_slow_fast(model, cfg), 0, 0.01, 4);
  const auto kf = kalman_oracle(p, 0.0, obs);
  CHECK(kf.variance.back() ==
        doctest::Approx(kalman_stationary_variance(p, 0.01, 1)).epsilon(1e-9));
  // Continuous-time limit: s1^2 / (a + sqrt(a^2 + hscale^2 s1^2)) with a = -a11.
  const double ct = p.s1 * p.s1 / (1.0 + std::sqrt(1.0 + 4.0 * p.s1 * p.s1));
  CHECK(kf.variance.back() == doctest::Approx(ct).epsilon(0.02));
}

TEST_CASE("Kalman stationary variance decreases in the gain") {
  double prev = kalman_stationary_variance(kalman_params(0.0), 0.01, 1);
  for (double g : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double v = kalman_stationary_variance(kalman_params(g), 0.01, 1);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("Kalman oracle rejects unsupported models") {
  const ModelSpec model = scalar();
  const auto obs = generate_observations(model, simulate_slow_fast(model, signal_cfg(0.1, 0.01, 2)),
                                         0, 0.01, 1);
  CHECK(code_of([&] { kalman_oracle(LinearModelParams{}, 0.0, obs); }) ==
        ErrorCode::UnsupportedModel);
  LinearModelParams tanh = kalman_params();
  tanh.sensor = SensorKind::Tanh;
  CHECK(code_of([&] { kalman_stationary_variance(tanh, 0.01, 1); }) ==
        ErrorCode::UnsupportedModel);
}

TEST_CASE("particle filter tracks the Kalman mean") {
  const LinearModelParams p = kalman_params();
  const ModelSpec model = scalar(p, 0.5);
  SdeConfig cfg = signal_cfg(1.0, 0.01, 4);
  cfg.seed = 5;
  const auto obs = generate_observations(model, simulate_slow_fast(model, cfg), 0, 0.01, 8);
  const auto kf = kalman_oracle(p, 0.5, obs);
  FilterConfig fc;
  fc.Nf = 1000;
  fc.functional = FunctionalKind::Identity;
  const auto traj = run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, cfg);
  double err = 0.0, sd = 0.0;
  for (std::size_t k = 1; k < kf.mean.size(); ++k) {
    err += std::abs(traj.pi_F[k] - kf.mean[k]);
    sd += std::sqrt(kf.variance[k]);
  }
  CHECK(err <= 5.0 * sd / std::sqrt(1000.0));
}

TEST_CASE("filter discrepancy") {
  const auto a = constant_trajectory({0.3, 0.3, 0.3, 0.3});
  const auto b = constant_trajectory({0.1, 0.1, 0.1, 0.1});
  CHECK(filter_discrepancy(a, a, 1.0).average == 0.0);
  const double d1 = filter_discrepancy(a, b, 1.0).average;
  const double d2 = filter_discrepancy(a, b, 2.0).average;
  CHECK(d2 == doctest::Approx(d1 * d1).epsilon(1e-14));
  CHECK(filter_discrepancy(a, b, 1.0).terminal == doctest::Approx(0.2).epsilon(1e-14));

  const auto c = constant_trajectory({0.2, 0.4, 0.2, 0.4});
  const double e1 = filter_discrepancy(c, b, 1.0).average;
  const double e2 = filter_discrepancy(c, b, 2.0).average;
  CHECK(e2 > e1 * e1);

  const auto short_one = constant_trajectory({0.1, 0.1});
  CHECK(code_of([&] { filter_discrepancy(a, short_one, 1.0); }) == ErrorCode::GridMismatch);
}

TEST_CASE("filter CSV layout") {
  const ModelSpec model = scalar();
  const SdeConfig cfg = signal_cfg(0.02, 0.01, 2);
  const auto obs = generate_observations(model, simulate_slow_fast(model, cfg), 0, 0.01, 1);
  std::ostringstream o;
  write_observations_csv(o, obs);
  CHECK(o.str().find("time,dY0\n") != std::string::npos);
  FilterConfig fc;
  fc.Nf = 10;
  std::ostringstream t;
  write_trajectory_csv(t, run_filter(SignalKind::Multiscale, model, nullptr, obs, fc, cfg));
  CHECK(t.str().find("time,pi_F,log_rho1,ess\n") != std::string::npos);
}
