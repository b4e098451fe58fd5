// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "mvx/error.hpp"
#include "mvx/io.hpp"

namespace mvx {

double delta_schedule(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    fail(ErrorCode::InvalidEpsilon, "delta schedule needs 0 < epsilon < 1, got " + fmt17(epsilon));
  return epsilon * std::cbrt(-std::log(epsilon));
}

EnvelopeTerms envelope_terms(double epsilon, double delta) {
  EnvelopeTerms t;
  t.segment = delta * delta + delta;
  t.freezing = (delta * delta + delta * delta * delta) * std::exp(delta / epsilon) / epsilon;
  t.ergodic = epsilon / delta;
  return t;
}

void validate(const SweepConfig& cfg) {
  if (cfg.eps_grid.empty()) fail(ErrorCode::ValidationError, "eps_grid must not be empty");
  for (std::size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    const double e = cfg.eps_grid[i];
    if (!(e > 0.0 && e < 1.0)) fail(ErrorCode::ValidationError, "eps_grid entries in (0,1) violated");
    if (i > 0 && !(e < cfg.eps_grid[i - 1]))
      fail(ErrorCode::ValidationError, "eps_grid strictly decreasing violated");
  }
  if (cfg.mc_reps < 4) fail(ErrorCode::ValidationError, "mc_reps>=4 violated");
  if (cfg.p_orders.empty()) fail(ErrorCode::ValidationError, "p_orders must not be empty");
  for (double p : cfg.p_orders)
    if (!(p > 0.0)) fail(ErrorCode::ValidationError, "p_orders entries >0 violated");
}

std::uint64_t rep_seed(const SweepConfig& cfg, std::size_t rep) {
  return cfg.sde.seed + static_cast<std::uint64_t>(rep);
}

namespace {

using Clock = std::chrono::steady_clock;

SdeConfig grid_config(const ModelSpec& model, const SweepConfig& cfg, double eps) {
  SdeConfig sde = cfg.sde;
  sde.epsilon = eps;
  sde.delta_eps = delta_schedule(eps);
  sde.micro_substeps =
      std::max(cfg.sde.micro_substeps, stable_substeps(model, sde.dt_macro, eps));
  return sde;
}

// Rows for one grid point from per-rep statistics stats[p_index][rep].
void append_rows(SweepReport& report, const SweepConfig& cfg, const SdeConfig& sde,
                 const std::vector<std::vector<double>>& stats) {
  const double R = static_cast<double>(cfg.mc_reps);
  for (std::size_t q = 0; q < cfg.p_orders.size(); ++q) {
    double mean = 0.0;
    for (double v : stats[q]) mean += v;
    mean /= R;
    double ss = 0.0;
    for (double v : stats[q]) ss += (v - mean) * (v - mean);
    SweepRow row;
    row.eps = sde.epsilon;
    row.delta_eps = *sde.delta_eps;
    row.p = cfg.p_orders[q];
    row.mean_error = mean;
    row.std_error = std::sqrt(ss / (R - 1.0) / R);
    row.reps = cfg.mc_reps;
    row.substeps = sde.micro_substeps;
    row.envelope = envelope_terms(sde.epsilon, row.delta_eps);
    report.rows.push_back(row);
  }
}

void attach_fits(SweepReport& report, const SweepConfig& cfg) {
  if (cfg.eps_grid.size() < 3) return;
  for (double p : cfg.p_orders) {
    bool positive = true;
    for (const auto& row : report.rows)
      if (row.p == p && !(row.mean_error > 0.0)) positive = false;
    if (!positive) continue;
    report.fit_p.push_back(p);
    report.fits.push_back(rate_fit(report, p));
  }
}

[[noreturn]] void rethrow_at(const Error& e, double eps, std::size_t rep) {
  std::ostringstream msg;
  msg << "eps=" << fmt17(eps) << " rep=" << rep << ": " << e.what();
  throw Error(e.code(), msg.str());
}

}  // namespace

SweepReport averaging_error_sweep(const ModelSpec& model, const AveragedDrift& drift,
                                  const SweepConfig& cfg) {
  validate(cfg);
  SweepReport report;
  report.kind = "averaging";
  report.config_digest = content_digest(canonical_text(cfg));
  const std::size_t P = cfg.p_orders.size();

  for (double eps : cfg.eps_grid) {
    const auto start = Clock::now();
    SdeConfig sde = grid_config(model, cfg, eps);
    std::vector<std::vector<double>> stats(P, std::vector<double>(cfg.mc_reps, 0.0));
    for (std::size_t r = 0; r < cfg.mc_reps; ++r) {
      sde.seed = rep_seed(cfg, r);
      std::pair<PathEnsemble, PathEnsemble> pair;
      try {
        pair = coupled_pair(model, drift, sde);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Instability) throw;
        rethrow_at(e, eps, r);
      }
      const auto& [full, avg] = pair;
      const std::size_t N = full.particles(), n = model.n;
      std::vector<double> sup_sq(N, 0.0);
      for (std::size_t t = 0; t < full.slow.size(); ++t) {
        const auto& a = full.slow[t].points();
        const auto& b = avg.slow[t].points();
        for (std::size_t i = 0; i < N; ++i) {
          double sq = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const double d = a[i * n + k] - b[i * n + k];
            sq += d * d;
          }
          sup_sq[i] = std::max(sup_sq[i], sq);
        }
      }
      for (std::size_t q = 0; q < P; ++q) {
        double acc = 0.0;
        for (double s : sup_sq) acc += std::pow(s, cfg.p_orders[q]);
        stats[q][r] = acc / static_cast<double>(N);
      }
    }
    append_rows(report, cfg, sde, stats);
    report.runtime_seconds.push_back(
        std::chrono::duration<double>(Clock::now() - start).count());
  }
  attach_fits(report, cfg);
  return report;
}

SweepReport filter_error_sweep(const ModelSpec& model, const AveragedDrift& drift,
                               const SweepConfig& cfg) {
  validate(cfg);
  validate(cfg.filter);
  SweepReport report;
  report.kind = "filter";
  report.config_digest = content_digest(canonical_text(cfg));
  const std::size_t P = cfg.p_orders.size();

  for (double eps : cfg.eps_grid) {
    const auto start = Clock::now();
    SdeConfig sde = grid_config(model, cfg, eps);
    std::vector<std::vector<double>> stats(P, std::vector<double>(cfg.mc_reps, 0.0));
    for (std::size_t r = 0; r < cfg.mc_reps; ++r) {
      sde.seed = rep_seed(cfg, r);
      try {
        const auto [full, avg] = coupled_pair(model, drift, sde);
        const ObservationPath obs = generate_observations(model, full, 0, sde.dt_macro, sde.seed);
        const LawTrace avg_law = law_trace(avg);
        const FilterTrajectory a =
            run_filter(SignalKind::Multiscale, model, nullptr, obs, cfg.filter, sde);
        const FilterTrajectory b =
            run_filter(SignalKind::Averaged, model, &drift, obs, cfg.filter, sde, avg_law);
        for (std::size_t q = 0; q < P; ++q)
          stats[q][r] = filter_discrepancy(a, b, cfg.p_orders[q]).average;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Instability && e.code() != ErrorCode::WeightCollapse) throw;
        rethrow_at(e, eps, r);
      }
    }
    append_rows(report, cfg, sde, stats);
    report.runtime_seconds.push_back(
        std::chrono::duration<double>(Clock::now() - start).count());
  }
  attach_fits(report, cfg);
  return report;
}

RateFit rate_fit(std::span<const double> eps, std::span<const double> means) {
  if (eps.size() != means.size() || eps.size() < 2)
    fail(ErrorCode::DegenerateFit, "rate fit needs at least two paired points");
  const std::size_t k = eps.size();
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(means[i] > 0.0) || !(eps[i] > 0.0))
      fail(ErrorCode::DegenerateFit, "rate fit needs positive eps and errors");
    lx[i] = std::log(eps[i]);
    ly[i] = std::log(means[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::DegenerateFit, "rate fit needs distinct eps values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.points = k;
  return fit;
}

RateFit rate_fit(const SweepReport& report, double p) {
  std::vector<double> eps, means;
  for (const auto& row : report.rows) {
    if (row.p != p) continue;
    eps.push_back(row.eps);
    means.push_back(row.mean_error);
  }
  if (eps.size() < 3) fail(ErrorCode::DegenerateFit, "slope needs at least three grid points");
  return rate_fit(eps, means);
}

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
  os << "eps,delta_eps,p,mean_error,std_error,reps\n";
  for (const auto& row : report.rows)
    os << fmt17(row.eps) << ',' << fmt17(row.delta_eps) << ',' << fmt17(row.p) << ','
       << fmt17(row.mean_error) << ',' << fmt17(row.std_error) << ',' << row.reps << '\n';
}

std::string canonical_text(const SweepConfig& cfg) {
  std::ostringstream os;
  os << "eps_grid=";
  for (double e : cfg.eps_grid) os << fmt17(e) << ';';
  os << "\nmc_reps=" << cfg.mc_reps << "\np_orders=";
  for (double p : cfg.p_orders) os << fmt17(p) << ';';
  const auto& s = cfg.sde;
  os << "\nsde=" << fmt17(s.T) << ';' << fmt17(s.dt_macro) << ';' << s.micro_substeps << ';'
     << s.N << ';' << s.seed;
  const auto& f = cfg.filter;
  os << "\nfilter=" << f.Nf << ';' << fmt17(f.resample_threshold) << ';'
     << functional_name(f.functional) << ';' << fmt17(f.p);
  const auto& z = cfg.frozen;
  os << "\nfrozen=" << z.M << ';' << fmt17(z.dt) << ';'
     << (z.burn_in ? fmt17(*z.burn_in) : std::string("auto")) << ';' << fmt17(z.avg_window)
     << ';' << z.seed << '\n';
  return os.str();
}

}  // namespace mvx
