// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mvx/mvx.h"

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast mean-field SDE simulation, averaging and filtering"};
  app.set_version_flag("--version", std::string(mvx_version()));

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format;
  std::string threads = "";

  app.add_option("-c,--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--format", format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}));
  app.add_option("--threads", threads, "worker threads: a positive count or 'auto'");

  CLI11_PARSE(app, argc, argv);

  if (!threads.empty() && threads != "auto") {
    std::size_t count = 0;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(threads, &used);
      if (used != threads.size() || v == 0) throw std::invalid_argument(threads);
      count = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      std::cerr << "--threads expects a positive integer or 'auto', got '" << threads << "'\n";
      return 2;
    }
    mvx_set_threads(count);
  } else {
    // 'auto' and unset both defer to MVX_THREADS, then the hardware count.
    mvx_set_threads(0);
  }

  std::ifstream in(config_path, std::ios::binary);
  std::stringstream text;
  text << in.rdbuf();
  if (!in) {
    std::cerr << "cannot read " << config_path << "\n";
    return 2;
  }

  mvx_run_overrides overrides{};
  overrides.has_seed = seed.has_value() ? 1 : 0;
  overrides.seed = seed.value_or(0);
  overrides.output_dir = out_dir.empty() ? nullptr : out_dir.c_str();
  overrides.format = format.empty() ? nullptr : format.c_str();

  char* result = nullptr;
  const mvx_status status = mvx_run_config(text.str().c_str(), &overrides, &result);
  if (result) {
    (status == MVX_OK ? std::cout : std::cerr) << result;
    mvx_string_free(result);
  }
  return status == MVX_OK ? 0 : 1;
}
