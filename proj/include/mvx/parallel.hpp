// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <cstddef>
#include <functional>

namespace mvx {

// Worker count used by parallel_for. 0 restores the default, which reads
// MVX_THREADS and falls back to the hardware concurrency.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Splits [0, count) into contiguous chunks. The body must only write state
// owned by its index range; results are then independent of thread count.
// Nested calls run serially on the calling worker.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace mvx
