#pragma once

#include <cstddef>
#include <functional>

namespace noiseforge {

/// Runs body(begin, end) over [0, n) split into fixed-size chunks. Chunk
/// boundaries depend only on n and chunk, never on the worker count, so any
/// per-chunk reduction merged in chunk order is reproducible.
void parallel_for_chunks(std::size_t n, std::size_t chunk, unsigned threads,
                         const std::function<void(std::size_t, std::size_t)>& body);

/// Worker count used when callers pass 0.
unsigned default_threads() noexcept;

}  // namespace noiseforge
