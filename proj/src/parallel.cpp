// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mvx {

namespace {

std::atomic<std::size_t> g_threads{0};
thread_local bool t_in_parallel = false;

std::size_t default_threads() {
  if (const char* env = std::getenv("MVX_THREADS")) {
    const std::string value(env);
    if (value != "auto") {
      try {
        const long n = std::stol(value);
        if (n > 0) return static_cast<std::size_t>(n);
      } catch (const std::exception&) {
      }
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

constexpr std::size_t kMinChunk = 64;

}  // namespace

void set_thread_count(std::size_t threads) { g_threads.store(threads); }

std::size_t thread_count() {
  const std::size_t n = g_threads.load();
  return n == 0 ? default_threads() : n;
}

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  const std::size_t workers =
      std::min(thread_count(), (count + kMinChunk - 1) / kMinChunk);
  if (workers <= 1 || t_in_parallel) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](std::size_t w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    t_in_parallel = true;
    try {
      body(begin, end);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
    t_in_parallel = false;
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mvx
