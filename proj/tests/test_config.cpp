// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <doctest.h>

#include <filesystem>
#include <string>

#include "mvx/config.hpp"
#include "mvx/error.hpp"
#include "mvx/io.hpp"

using namespace mvx;
namespace fs = std::filesystem;

namespace {

std::string message_of(std::string_view text, ErrorCode expected) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("config was accepted");
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mvx_test_config_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const RunConfig cfg = parse_config(R"({"command": "simulate"})");
  CHECK(cfg.command == Command::Simulate);
  CHECK(cfg.model.type == "linear");
  CHECK(cfg.model.params == LinearModelParams{});
  CHECK(cfg.sde.N == SdeConfig{}.N);
  CHECK(cfg.seed == 1);
  CHECK(cfg.sde.seed == 1);
  CHECK(cfg.frozen.seed == 1);
  CHECK(cfg.format == OutputFormat::Csv);
  const ModelSpec model = build_model(cfg);
  CHECK(model.x0 == Vec{0.5});
  CHECK(model.z0 == Vec{0.0});
}

TEST_CASE("comments and nested sections") {
  const RunConfig cfg = parse_config(R"({
    // sweep over two scales
    "command": "sweep-averaging",
    "seed": 9,
    "sweep": {"eps_grid": [0.1, 0.02], "mc_reps": 5, "p_orders": [1]},
    "model": {"params": {"a13": 0.5, "sensor": "linear"}},
    "format": "both"
  })");
  CHECK(cfg.command == Command::SweepAveraging);
  CHECK(cfg.sweep.eps_grid == std::vector<double>{0.1, 0.02});
  CHECK(cfg.sweep.mc_reps == 5);
  CHECK(cfg.model.params.a13 == 0.5);
  CHECK(cfg.model.params.sensor == SensorKind::Linear);
  CHECK(cfg.format == OutputFormat::Both);
  const SweepConfig sweep = build_sweep(cfg);
  CHECK(sweep.sde.seed == 9);
  CHECK(sweep.p_orders == std::vector<double>{1.0});
}

TEST_CASE("validation errors name the invariant") {
  const std::string gamma =
      message_of(R"({"command": "simulate", "model": {"params": {"gamma": 0}}})",
                 ErrorCode::ValidationError);
  CHECK(gamma.find("gamma>0") != std::string::npos);

  const std::string cap = message_of(
      R"({"command": "simulate", "sde": {"epsilon": 0.001, "micro_substeps": 2}})",
      ErrorCode::ValidationError);
  CHECK(cap.find("micro_substeps") != std::string::npos);

  message_of(R"({"command": "sweep-averaging", "sweep": {"eps_grid": [0.01, 0.1]}})",
             ErrorCode::ValidationError);
  message_of(R"({"command": "probe", "probe": {"lo": 1, "hi": 1}})", ErrorCode::ValidationError);
  message_of(R"({"command": "filter", "observation": {"reference_particle": 100000}})",
             ErrorCode::ValidationError);
  message_of(R"({"command": "bbar", "oracle": {"mode": "user"}})", ErrorCode::ValidationError);
}

TEST_CASE("parse errors carry a location") {
  const std::string unknown =
      message_of(R"({"command": "simulate", "sde": {"stepz": 1}})", ErrorCode::ParseError);
  CHECK(unknown.find("sde.stepz") != std::string::npos);
  const std::string malformed = message_of("{\n  \"command\": \"simulate\",\n  oops\n}",
                                           ErrorCode::ParseError);
  CHECK(malformed.find("line 3") != std::string::npos);
  message_of(R"({"command": "launch"})", ErrorCode::ParseError);
  message_of(R"({"seed": 1})", ErrorCode::ParseError);
  message_of(R"({"command": "simulate", "seed": "one"})", ErrorCode::ParseError);
}

TEST_CASE("shipped configs parse") {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(MVX_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(parse_config(read_file(entry.path().string())));
    ++seen;
  }
  CHECK(seen == 7);
}

TEST_CASE("serialize and parse round trip") {
  RunConfig cfg = parse_config(R"({
    "command": "filter",
    "seed": 77,
    "model": {"n": 2, "m": 2, "x0": [0.1, -0.2], "params": {"s1": 0.3, "hscale": 2}},
    "sde": {"N": 64, "T": 0.5, "epsilon": 0.02},
    "filter": {"Nf": 300, "functional": "identity", "resample_threshold": 0.7},
    "frozen": {"burn_in": 1.5},
    "query": {"x": [1, 2], "mu_mean": [0, 0], "mu_second_moment": 3},
    "observation": {"dt": 0.02}
  })");
  const std::string text = serialize_config(cfg);
  const RunConfig back = parse_config(text);
  CHECK(back == cfg);
  CHECK(serialize_config(back) == text);
}

TEST_CASE("probe command writes its report") {
  const fs::path dir = scratch("probe");
  RunConfig cfg = parse_config(R"({"command": "probe", "probe": {"samples": 500}})");
  cfg.output_dir = dir.string();
  const RunResult r = run_command(cfg);
  CHECK(r.exit_code == 0);
  CHECK(!r.error);
  CHECK(fs::exists(dir / "probe.json"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(read_file((dir / "probe.json").string()).find("\"beta1\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep command output is stable across reruns") {
  const fs::path dir = scratch("sweep");
  RunConfig cfg = parse_config(R"({
    "command": "sweep-averaging",
    "sde": {"N": 40, "T": 0.3},
    "sweep": {"eps_grid": [0.1, 0.05, 0.02, 0.01], "mc_reps": 4, "p_orders": [1, 2]}
  })");
  cfg.output_dir = dir.string();
  REQUIRE(run_command(cfg).exit_code == 0);
  const std::string first = read_file((dir / "sweep.csv").string());
  // schema line + header + 4 grid points x 2 orders
  CHECK(line_count(first) == 2 + 8);
  REQUIRE(run_command(cfg).exit_code == 0);
  CHECK(read_file((dir / "sweep.csv").string()) == first);
  fs::remove_all(dir);
}

TEST_CASE("module errors produce error.json") {
  const fs::path dir = scratch("error");
  RunConfig cfg = parse_config(R"({"command": "simulate", "sde": {"N": 4, "T": 0.1}})");
  cfg.output_dir = dir.string();
  cfg.model.x0 = {1e200};
  cfg.model.params.a11 = 1e200;
  const RunResult r = run_command(cfg);
  CHECK(r.exit_code == 1);
  REQUIRE(r.error);
  CHECK(*r.error == ErrorCode::Instability);
  const std::string body = read_file((dir / "error.json").string());
  CHECK(body.find("\"stage\"") != std::string::npos);
  CHECK(body.find("\"code\"") != std::string::npos);
  fs::remove_all(dir);
}
