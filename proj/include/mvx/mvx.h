/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 mvx-avgfilter contributors */
#ifndef MVX_MVX_H
#define MVX_MVX_H

#include <stddef.h>
#include <stdint.h>

#if defined(MVX_BUILDING_LIBRARY)
#define MVX_API __attribute__((visibility("default")))
#else
#define MVX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values match the library's internal error codes. */
typedef enum mvx_status {
  MVX_OK = 0,
  MVX_INVALID_PARAMS = 1,
  MVX_DIMENSION_MISMATCH = 2,
  MVX_NON_FINITE_RESULT = 3,
  MVX_DEGENERATE_WEIGHTS = 4,
  MVX_INSTABILITY = 5,
  MVX_MISSING_DELTA = 6,
  MVX_INSUFFICIENT_WINDOW = 7,
  MVX_FIT_FAILURE = 8,
  MVX_UNSUPPORTED_MODEL = 9,
  MVX_INDEX_OUT_OF_RANGE = 10,
  MVX_WEIGHT_COLLAPSE = 11,
  MVX_GRID_MISMATCH = 12,
  MVX_INVALID_EPSILON = 13,
  MVX_DEGENERATE_FIT = 14,
  MVX_PARSE_ERROR = 15,
  MVX_VALIDATION_ERROR = 16,
  MVX_IO_ERROR = 17,
  MVX_NULL_ARGUMENT = 100,
  MVX_INTERNAL = 101
} mvx_status;

typedef struct mvx_model mvx_model;

typedef struct mvx_linear_params {
  double a11, a12, a13, s1;
  double gamma, c1, c2, c3, s2;
  double hscale;
  int sensor; /* 0 tanh, 1 linear */
} mvx_linear_params;

typedef struct mvx_probe_report {
  double lipschitz_b1s1;
  double lipschitz_b2s2;
  double lipschitz_h;
  double beta1;
  double beta2;
  double p;
  double margin;
  double h_bound;
  double fast_stiffness;
  size_t sample_count;
} mvx_probe_report;

typedef struct mvx_frozen_config {
  size_t M;
  double dt;
  double burn_in; /* negative selects the default */
  double avg_window;
  uint64_t seed;
} mvx_frozen_config;

/* Overrides applied on top of a JSON run config. NULL strings and
 * has_seed == 0 leave the file value in place. */
typedef struct mvx_run_overrides {
  int has_seed;
  uint64_t seed;
  const char* output_dir;
  const char* format;
} mvx_run_overrides;

MVX_API const char* mvx_version(void);

/* Message of the last failure on the calling thread, or "". */
MVX_API const char* mvx_last_error(void);
MVX_API const char* mvx_status_name(mvx_status status);

MVX_API void mvx_linear_params_default(mvx_linear_params* out);
MVX_API void mvx_frozen_config_default(mvx_frozen_config* out);

/* x0 has n entries, z0 has m entries. */
MVX_API mvx_status mvx_model_create_linear(const mvx_linear_params* params, size_t n, size_t m,
                                           size_t l, const double* x0, const double* z0,
                                           mvx_model** out);
MVX_API void mvx_model_destroy(mvx_model* model);
MVX_API mvx_status mvx_model_dims(const mvx_model* model, size_t* n, size_t* m, size_t* l);

/* Coefficients at (x, mu, z, nu) with mu and nu given by mean and second
 * moment. Output buffers: b1[n], sigma1[n*n], b2[m], sigma2[m*m], h[l];
 * any may be NULL. */
MVX_API mvx_status mvx_model_eval(const mvx_model* model, const double* x, const double* mu_mean,
                                  double mu_second_moment, const double* z, const double* nu_mean,
                                  double nu_second_moment, double* b1, double* sigma1, double* b2,
                                  double* sigma2, double* h);

MVX_API mvx_status mvx_probe(const mvx_model* model, size_t samples, double lo, double hi,
                             double p, uint64_t seed, mvx_probe_report* out);

/* Averaged drift at (x, mu) from the frozen equation; drift and std_error
 * have n entries. */
MVX_API mvx_status mvx_estimate_bbar(const mvx_model* model, const double* x,
                                     const double* mu_mean, double mu_second_moment,
                                     const mvx_frozen_config* cfg, double* drift,
                                     double* std_error);

MVX_API mvx_status mvx_delta_schedule(double epsilon, double* out);

MVX_API double mvx_log_likelihood_increment(const double* h, const double* dy, size_t l, double dt);

/* Thread count for parallel kernels; 0 restores the default. */
MVX_API void mvx_set_threads(size_t threads);

/* Parses config_json, applies overrides and runs the command. *result
 * receives the manifest or error JSON; release it with mvx_string_free. */
MVX_API mvx_status mvx_run_config(const char* config_json, const mvx_run_overrides* overrides,
                                  char** result);
MVX_API void mvx_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* MVX_MVX_H */
