#pragma once

#include <cstddef>
#include <functional>

namespace relloc {

/// Worker cap from RELLOC_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend on
/// the worker count, so body must write only to per-index outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 256);

}  // namespace relloc
