// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "mvx/mvx.h"

namespace fs = std::filesystem;

namespace {

struct Model {
  mvx_model* ptr = nullptr;
  Model() {
    mvx_linear_params p;
    mvx_linear_params_default(&p);
    const double x0 = 0.5, z0 = 0.0;
    REQUIRE(mvx_model_create_linear(&p, 1, 1, 1, &x0, &z0, &ptr) == MVX_OK);
  }
  ~Model() { mvx_model_destroy(ptr); }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(mvx_version()) > 0);
  CHECK(std::string(mvx_status_name(MVX_OK)) == "Ok");
  CHECK(std::string(mvx_status_name(MVX_INVALID_EPSILON)) == "InvalidEpsilon");
  CHECK(std::string(mvx_status_name(MVX_NULL_ARGUMENT)) == "NullArgument");
}

TEST_CASE("model creation and evaluation") {
  Model model;
  size_t n = 0, m = 0, l = 0;
  REQUIRE(mvx_model_dims(model.ptr, &n, &m, &l) == MVX_OK);
  CHECK(n == 1);
  CHECK(m == 1);
  CHECK(l == 1);

  const double x = 1.0, mu = 1.0, z = 2.0, nu = 0.0;
  double b1 = 0, s1 = 0, b2 = 0, s2 = 0, h = 0;
  REQUIRE(mvx_model_eval(model.ptr, &x, &mu, 1.0, &z, &nu, 0.0, &b1, &s1, &b2, &s2, &h) == MVX_OK);
  CHECK(b1 == 1.0);            // -1 + 2
  CHECK(b2 == -4.0 + 1.0);     // -gamma z + c1 x
  CHECK(s1 == 0.5);
  CHECK(s2 == 1.0);
  CHECK(h == doctest::Approx(2.0 * std::tanh(1.0)));
  CHECK(mvx_model_eval(model.ptr, &x, &mu, 1.0, &z, &nu, 0.0, nullptr, nullptr, nullptr, nullptr,
                       nullptr) == MVX_OK);
}

TEST_CASE("errors set the last message") {
  mvx_linear_params p;
  mvx_linear_params_default(&p);
  p.gamma = 0.0;
  const double x0 = 0.5, z0 = 0.0;
  mvx_model* model = nullptr;
  CHECK(mvx_model_create_linear(&p, 1, 1, 1, &x0, &z0, &model) == MVX_INVALID_PARAMS);
  CHECK(model == nullptr);
  CHECK(std::string(mvx_last_error()).find("gamma>0") != std::string::npos);
  CHECK(mvx_model_create_linear(nullptr, 1, 1, 1, &x0, &z0, &model) == MVX_NULL_ARGUMENT);

  double delta = 0.0;
  CHECK(mvx_delta_schedule(1.5, &delta) == MVX_INVALID_EPSILON);
  REQUIRE(mvx_delta_schedule(0.1, &delta) == MVX_OK);
  CHECK(delta == doctest::Approx(0.13208).epsilon(1e-4));
  mvx_model_destroy(nullptr);
}

TEST_CASE("probe and averaged drift") {
  Model model;
  mvx_probe_report report;
  REQUIRE(mvx_probe(model.ptr, 2000, -2.0, 2.0, 1.0, 3, &report) == MVX_OK);
  CHECK(report.beta1 == doctest::Approx(3.5).epsilon(1e-6));
  CHECK(report.beta2 == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(report.sample_count == 2000);

  mvx_frozen_config cfg;
  mvx_frozen_config_default(&cfg);
  cfg.M = 1000;
  const double x = 1.0, mu = 1.0;
  double drift = 0.0, se = 0.0;
  REQUIRE(mvx_estimate_bbar(model.ptr, &x, &mu, 1.0, &cfg, &drift, &se) == MVX_OK);
  CHECK(std::abs(drift + 1.0 / 3.0) <= 0.05);
  CHECK(se > 0.0);
  cfg.avg_window = 0.01;
  CHECK(mvx_estimate_bbar(model.ptr, &x, &mu, 1.0, &cfg, &drift, &se) == MVX_INSUFFICIENT_WINDOW);
}

TEST_CASE("log-likelihood increment") {
  const double h = 1.0, dy = 0.1;
  CHECK(mvx_log_likelihood_increment(&h, &dy, 1, 0.01) == doctest::Approx(0.095));
}

TEST_CASE("run a config through the C API") {
  const fs::path dir = fs::temp_directory_path() / "mvx_test_capi_run";
  fs::remove_all(dir);
  const std::string out = dir.string();
  mvx_run_overrides ov{1, 5, out.c_str(), "both"};
  char* result = nullptr;
  mvx_set_threads(2);
  REQUIRE(mvx_run_config(R"({"command": "probe", "probe": {"samples": 200}})", &ov, &result) ==
          MVX_OK);
  mvx_set_threads(0);
  REQUIRE(result != nullptr);
  CHECK(std::string(result).find("\"config_digest\"") != std::string::npos);
  mvx_string_free(result);
  CHECK(fs::exists(dir / "result.json"));
  CHECK(fs::exists(dir / "manifest.json"));

  result = nullptr;
  CHECK(mvx_run_config("{\"command\": ", nullptr, &result) == MVX_PARSE_ERROR);
  REQUIRE(result != nullptr);
  CHECK(std::string(result).find("\"stage\": \"config\"") != std::string::npos);
  mvx_string_free(result);
  CHECK(mvx_run_config(nullptr, nullptr, &result) == MVX_NULL_ARGUMENT);
  fs::remove_all(dir);
}
