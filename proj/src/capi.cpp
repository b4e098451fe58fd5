// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/mvx.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include <json.hpp>

#include "mvx/averaging.hpp"
#include "mvx/config.hpp"
#include "mvx/error.hpp"
#include "mvx/experiments.hpp"
#include "mvx/filtering.hpp"
#include "mvx/io.hpp"
#include "mvx/model.hpp"
#include "mvx/parallel.hpp"

struct mvx_model {
  mvx::ModelSpec spec;
};

namespace {

thread_local std::string t_last_error;

mvx_status record(mvx_status status, std::string message) {
  t_last_error = std::move(message);
  return status;
}

template <class F>
mvx_status guarded(F&& body) {
  try {
    body();
    t_last_error.clear();
    return MVX_OK;
  } catch (const mvx::Error& e) {
    return record(static_cast<mvx_status>(e.code()), e.what());
  } catch (const std::exception& e) {
    return record(MVX_INTERNAL, e.what());
  } catch (...) {
    return record(MVX_INTERNAL, "unknown failure");
  }
}

mvx::MeasureSummary summary(const double* mean, std::size_t n, double second_moment) {
  return mvx::MeasureSummary::from_moments(std::vector<double>(mean, mean + n), second_moment);
}

void copy_out(const mvx::Vec& v, double* out) {
  if (out) std::memcpy(out, v.data(), v.size() * sizeof(double));
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* mvx_version(void) { return "1.0.0"; }

const char* mvx_last_error(void) { return t_last_error.c_str(); }

const char* mvx_status_name(mvx_status status) {
  if (status == MVX_OK) return "Ok";
  if (status == MVX_NULL_ARGUMENT) return "NullArgument";
  if (status == MVX_INTERNAL) return "Internal";
  if (status >= MVX_INVALID_PARAMS && status <= MVX_IO_ERROR)
    return mvx::error_code_name(static_cast<mvx::ErrorCode>(status));
  return "Unknown";
}

void mvx_linear_params_default(mvx_linear_params* out) {
  if (!out) return;
  const mvx::LinearModelParams p;
  *out = {p.a11, p.a12, p.a13, p.s1, p.gamma, p.c1, p.c2, p.c3, p.s2, p.hscale,
          p.sensor == mvx::SensorKind::Tanh ? 0 : 1};
}

void mvx_frozen_config_default(mvx_frozen_config* out) {
  if (!out) return;
  const mvx::FrozenRunConfig c;
  *out = {c.M, c.dt, -1.0, c.avg_window, c.seed};
}

mvx_status mvx_model_create_linear(const mvx_linear_params* params, size_t n, size_t m, size_t l,
                                   const double* x0, const double* z0, mvx_model** out) {
  if (!params || !x0 || !z0 || !out) return record(MVX_NULL_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    mvx::LinearModelParams p;
    p.a11 = params->a11;
    p.a12 = params->a12;
    p.a13 = params->a13;
    p.s1 = params->s1;
    p.gamma = params->gamma;
    p.c1 = params->c1;
    p.c2 = params->c2;
    p.c3 = params->c3;
    p.s2 = params->s2;
    p.hscale = params->hscale;
    p.sensor = params->sensor == 0 ? mvx::SensorKind::Tanh : mvx::SensorKind::Linear;
    auto spec = mvx::make_linear_model(p, n, m, l, mvx::Vec(x0, x0 + n), mvx::Vec(z0, z0 + m));
    *out = new mvx_model{std::move(spec)};
  });
}

void mvx_model_destroy(mvx_model* model) { delete model; }

mvx_status mvx_model_dims(const mvx_model* model, size_t* n, size_t* m, size_t* l) {
  if (!model) return record(MVX_NULL_ARGUMENT, "null model");
  if (n) *n = model->spec.n;
  if (m) *m = model->spec.m;
  if (l) *l = model->spec.l;
  return MVX_OK;
}

mvx_status mvx_model_eval(const mvx_model* model, const double* x, const double* mu_mean,
                          double mu_second_moment, const double* z, const double* nu_mean,
                          double nu_second_moment, double* b1, double* sigma1, double* b2,
                          double* sigma2, double* h) {
  if (!model || !x || !mu_mean || !z || !nu_mean) return record(MVX_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& s = model->spec;
    const auto mu = summary(mu_mean, s.n, mu_second_moment);
    const auto nu = summary(nu_mean, s.m, nu_second_moment);
    const auto v = mvx::eval_coefficients(s, {x, s.n}, mu, {z, s.m}, nu);
    copy_out(v.b1, b1);
    copy_out(v.sigma1, sigma1);
    copy_out(v.b2, b2);
    copy_out(v.sigma2, sigma2);
    copy_out(v.h, h);
  });
}

mvx_status mvx_probe(const mvx_model* model, size_t samples, double lo, double hi, double p,
                     uint64_t seed, mvx_probe_report* out) {
  if (!model || !out) return record(MVX_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto r = mvx::probe_assumptions(model->spec, samples, mvx::ProbeBox{lo, hi}, p, seed);
    *out = {r.lipschitz_b1s1, r.lipschitz_b2s2, r.lipschitz_h, r.beta1,          r.beta2,
            r.p,              r.margin,         r.h_bound,     r.fast_stiffness, r.sample_count};
  });
}

mvx_status mvx_estimate_bbar(const mvx_model* model, const double* x, const double* mu_mean,
                             double mu_second_moment, const mvx_frozen_config* cfg, double* drift,
                             double* std_error) {
  if (!model || !x || !mu_mean || !cfg || !drift) return record(MVX_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& s = model->spec;
    mvx::FrozenRunConfig fc;
    fc.M = cfg->M;
    fc.dt = cfg->dt;
    if (cfg->burn_in >= 0.0) fc.burn_in = cfg->burn_in;
    fc.avg_window = cfg->avg_window;
    fc.seed = cfg->seed;
    const auto est = mvx::estimate_bbar(s, {x, s.n}, summary(mu_mean, s.n, mu_second_moment), fc);
    copy_out(est.drift, drift);
    copy_out(est.std_error, std_error);
  });
}

mvx_status mvx_delta_schedule(double epsilon, double* out) {
  if (!out) return record(MVX_NULL_ARGUMENT, "null argument");
  return guarded([&] { *out = mvx::delta_schedule(epsilon); });
}

double mvx_log_likelihood_increment(const double* h, const double* dy, size_t l, double dt) {
  if (l == 0) return 0.0;
  return mvx::log_likelihood_increment({h, l}, {dy, l}, dt);
}

void mvx_set_threads(size_t threads) { mvx::set_thread_count(threads); }

mvx_status mvx_run_config(const char* config_json, const mvx_run_overrides* overrides,
                          char** result) {
  if (!config_json || !result) return record(MVX_NULL_ARGUMENT, "null argument");
  *result = nullptr;
  mvx::RunResult run;
  const mvx_status status = guarded([&] {
    mvx::RunConfig cfg = mvx::parse_config(config_json);
    if (overrides) {
      if (overrides->has_seed) {
        cfg.seed = overrides->seed;
        cfg.sde.seed = overrides->seed;
        cfg.frozen.seed = overrides->seed;
      }
      if (overrides->output_dir) cfg.output_dir = overrides->output_dir;
      if (overrides->format) {
        const std::string f = overrides->format;
        if (f == "csv") cfg.format = mvx::OutputFormat::Csv;
        else if (f == "json") cfg.format = mvx::OutputFormat::Json;
        else if (f == "both") cfg.format = mvx::OutputFormat::Both;
        else mvx::fail(mvx::ErrorCode::ValidationError, "format must be csv, json or both");
      }
    }
    run = mvx::run_command(cfg);
  });
  if (status != MVX_OK) {
    const nlohmann::json err = {{"error",
                                 {{"code", mvx_status_name(status)},
                                  {"message", t_last_error},
                                  {"stage", "config"}}}};
    *result = duplicate(err.dump(2) + "\n");
    return status;
  }
  *result = duplicate(run.summary_json);
  if (run.exit_code == 0) return MVX_OK;
  if (run.error) return record(static_cast<mvx_status>(*run.error), run.summary_json);
  return record(MVX_INTERNAL, run.summary_json);
}

void mvx_string_free(char* s) { std::free(s); }

}  // extern "C"
