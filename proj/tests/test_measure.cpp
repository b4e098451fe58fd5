// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mvx/error.hpp"
#include "mvx/measure.hpp"

using namespace mvx;

namespace {

ParticleCloud random_cloud(Stream& s, std::size_t n, double shift) {
  std::vector<double> pts(n);
  for (auto& v : pts) v = shift + 2.0 * s.normal();
  return ParticleCloud(std::move(pts), 1);
}

double cloud_mean(const ParticleCloud& c) { return summarize(c).mean[0]; }

}  // namespace

TEST_CASE("cloud invariants are enforced") {
  CHECK_THROWS_AS(ParticleCloud({}, 1), Error);
  CHECK_THROWS_AS(ParticleCloud({1.0, NAN}, 1), Error);
  CHECK_THROWS_AS(ParticleCloud({1.0, 2.0}, {0.5, 0.6}, 1), Error);
  CHECK_THROWS_AS(ParticleCloud({1.0, 2.0}, {1.5, -0.5}, 1), Error);
  CHECK_NOTHROW(ParticleCloud({1.0, 2.0}, {0.25, 0.75}, 1));
}

TEST_CASE("summarize examples") {
  auto s = summarize(ParticleCloud({-1.0, 1.0}, 1));
  CHECK(s.mean[0] == 0.0);
  CHECK(s.second_moment == 1.0);
  s = summarize(ParticleCloud({3.0}, 1));
  CHECK(s.mean[0] == 3.0);
  CHECK(s.second_moment == 9.0);
  s = summarize(ParticleCloud({0.0, 2.0}, {0.75, 0.25}, 1));
  CHECK(s.mean[0] == 0.5);
  CHECK(s.second_moment == 1.0);
  CHECK(s.n_points == 2);
}

TEST_CASE("second moment dominates squared mean") {
  Stream rng(4, "summary");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pts(3 * 7);
    for (auto& v : pts) v = 5.0 + 1e-9 * rng.normal();
    const auto s = summarize(ParticleCloud(pts, 3));
    double sq = 0.0;
    for (double v : s.mean) sq += v * v;
    CHECK(s.second_moment >= sq);
  }
  const auto f = MeasureSummary::from_moments({2.0}, 1.0);
  CHECK(f.second_moment == 4.0);
}

TEST_CASE("integrate examples") {
  const ParticleCloud sym({-1.0, 1.0}, 1);
  const ParticleCloud skew({0.0, 2.0}, {0.75, 0.25}, 1);
  CHECK(integrate(sym, [](auto) { return 1.0; }) == 1.0);
  CHECK(integrate(sym, [](auto x) { return x[0]; }) == 0.0);
  CHECK(integrate(skew, [](auto x) { return x[0] * x[0]; }) == 1.0);
  CHECK_THROWS_AS(integrate(sym, [](auto x) { return std::log(x[0] + 1.0) / 0.0; }), Error);
}

TEST_CASE("rho_estimate examples") {
  Stream rng(5, "rho");
  const ParticleCloud a = random_cloud(rng, 200, 0.0);
  CHECK(rho_estimate(a, a) == 0.0);
  CHECK(rho_estimate(ParticleCloud({0.0}, 1), ParticleCloud({1.0}, 1)) == doctest::Approx(1.0));
  std::vector<double> shifted = a.points();
  for (auto& v : shifted) v += 0.7;
  CHECK(rho_estimate(a, ParticleCloud(shifted, 1)) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK_THROWS_AS(rho_estimate(a, ParticleCloud({0.0, 0.0}, 2)), Error);
}

TEST_CASE("W1 against a brute-force quantile coupling") {
  // Equal-size uniform clouds: W1 is the mean gap between sorted samples.
  Stream rng(6, "quantile");
  for (int trial = 0; trial < 20; ++trial) {
    ParticleCloud a = random_cloud(rng, 64, 0.0), b = random_cloud(rng, 64, 1.0);
    std::vector<double> sa = a.points(), sb = b.points();
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double ref = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) ref += std::abs(sa[i] - sb[i]);
    ref /= 64.0;
    CHECK(rho_estimate(a, b) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("W1 metric properties on random triples") {
  Stream rng(7, "triples");
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_cloud(rng, 30, 0.0);
    const auto b = random_cloud(rng, 45, rng.normal());
    const auto c = random_cloud(rng, 17, 2.0 * rng.normal());
    CHECK(rho_estimate(a, c) <= rho_estimate(a, b) + rho_estimate(b, c) + 1e-9);
    CHECK(rho_estimate(a, b) == doctest::Approx(rho_estimate(b, a)).epsilon(1e-12));
    CHECK(rho_estimate(a, b) >= std::abs(cloud_mean(a) - cloud_mean(b)) - 1e-9);
  }
}

TEST_CASE("rho_estimate in two dimensions sums marginals plus blend") {
  const ParticleCloud a({0.0, 0.0, 1.0, 1.0}, 2);
  const ParticleCloud b({0.0, 1.0, 1.0, 2.0}, 2);
  CHECK(rho_estimate(a, b) == doctest::Approx(1.0));
  // Second moments: a -> 1, b -> 3.
  CHECK(rho_estimate(a, b, 0.5) == doctest::Approx(2.0));
}

TEST_CASE("systematic resampling examples") {
  Stream rng(8, "resample");
  const ParticleCloud one({1.0, 2.0, 3.0}, {0.0, 1.0, 0.0}, 1);
  const auto r1 = systematic_resample(one, rng);
  for (double v : r1.points()) CHECK(v == 2.0);
  CHECK(r1.uniform_weights());

  constexpr std::size_t N = 10000;
  std::vector<double> pts(N), w(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) pts[i] = i < N / 2 ? 0.0 : 10.0;
  w[0] = 0.5;
  w[N - 1] = 0.5;
  const auto r2 = systematic_resample(ParticleCloud(pts, w, 1), rng);
  std::size_t zeros = 0;
  for (double v : r2.points()) zeros += v == 0.0;
  CHECK(std::abs(double(zeros) - 5000.0) <= 3.0 * std::sqrt(N * 0.25));

  CHECK_THROWS_AS(systematic_indices(std::vector<double>{0.0, 0.0}, 0.5, 2), Error);
}

TEST_CASE("systematic multiplicities match N times weight") {
  const std::vector<double> w{0.1, 0.25, 0.05, 0.6};
  for (double u : {0.01, 0.3, 0.77, 0.99}) {
    const auto idx = systematic_indices(w, u, 20);
    std::vector<int> count(4, 0);
    for (auto j : idx) ++count[j];
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(count[j] - 20.0 * w[j]) < 1.0 + 1e-12);
  }
}

TEST_CASE("resampling preserves the mean over repeated seeds") {
  Stream gen(9, "cloud");
  std::vector<double> pts(500), w(500);
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = gen.normal();
    w[i] = std::exp(pts[i]);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  const ParticleCloud cloud(pts, w, 1);
  const double target = cloud_mean(cloud);
  double sum = 0.0, sq = 0.0;
  constexpr int reps = 400;
  for (int r = 0; r < reps; ++r) {
    Stream rng(static_cast<std::uint64_t>(r), "resample-mean");
    const double m = cloud_mean(systematic_resample(cloud, rng));
    sum += m;
    sq += m * m;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sq / reps - mean * mean) / reps);
  CHECK(std::abs(mean - target) <= 3.0 * se + 1e-12);
}

TEST_CASE("cloud CSV rows carry weight then coordinates") {
  std::ostringstream os;
  write_cloud_csv(os, ParticleCloud({0.5, -1.0}, 2));
  CHECK(os.str() == "weight,x0,x1\n1,0.5,-1\n");
}
