// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvx/averaging.hpp"
#include "mvx/error.hpp"
#include "mvx/experiments.hpp"
#include "mvx/filtering.hpp"
#include "mvx/model.hpp"
#include "mvx/sde.hpp"

namespace mvx {

enum class Command { Simulate, Frozen, Bbar, Filter, SweepAveraging, SweepFilter, Probe };
enum class OutputFormat { Csv, Json, Both };

const char* command_name(Command command);
const char* format_name(OutputFormat format);

struct ModelSection {
  std::string type = "linear";
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t l = 1;
  Vec x0;  // empty: 0.5 in every coordinate
  Vec z0;  // empty: zero
  LinearModelParams params;

  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct SweepSection {
  std::vector<double> eps_grid{0.1, 0.05, 0.02, 0.01};
  std::size_t mc_reps = 8;
  std::vector<double> p_orders{1.0, 2.0};

  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct OracleSection {
  OracleMode mode = OracleMode::AnalyticLinear;
  double quantization = 0.05;

  friend bool operator==(const OracleSection&, const OracleSection&) = default;
};

/// Point (x, mu) for the frozen and bbar commands. mu defaults to the Dirac
/// mass at x.
struct QuerySection {
  Vec x;  // empty: model x0
  Vec mu_mean;
  std::optional<double> mu_second_moment;

  friend bool operator==(const QuerySection&, const QuerySection&) = default;
};

struct ProbeSection {
  std::size_t samples = 4000;
  double lo = -2.0;
  double hi = 2.0;
  double p = 1.0;

  friend bool operator==(const ProbeSection&, const ProbeSection&) = default;
};

struct ObservationSection {
  double dt = 0.0;  // 0: the macro step
  std::size_t reference_particle = 0;

  friend bool operator==(const ObservationSection&, const ObservationSection&) = default;
};

struct RunConfig {
  Command command = Command::Simulate;
  ModelSection model;
  SdeConfig sde;  // sde.seed mirrors seed
  FrozenRunConfig frozen;  // frozen.seed mirrors seed
  FilterConfig filter;
  SweepSection sweep;
  OracleSection oracle;
  QuerySection query;
  ProbeSection probe;
  ObservationSection observation;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  OutputFormat format = OutputFormat::Csv;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses the JSON config. Throws ParseError (with line or key) on malformed
/// input and ValidationError naming the violated invariant.
RunConfig parse_config(std::string_view text);

/// Canonical JSON with every field present.
std::string serialize_config(const RunConfig& cfg);

/// Re-applies invariants after programmatic edits (seed, output_dir).
void validate(const RunConfig& cfg);

ModelSpec build_model(const RunConfig& cfg);
SweepConfig build_sweep(const RunConfig& cfg);

struct RunResult {
  int exit_code = 0;
  std::optional<ErrorCode> error;  // set when a module error stopped the run
  std::string summary_json;  // manifest on success, error object otherwise
  std::vector<std::string> files;
};

/// Executes the command, writing data files and manifest.json under
/// output_dir. Never throws for module errors: failures produce exit code 1
/// and error.json with the failing stage.
RunResult run_command(const RunConfig& cfg);

}  // namespace mvx
