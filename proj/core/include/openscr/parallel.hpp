#pragma once

#include <cstddef>
#include <functional>
#include <random>

namespace openscr {

/// Process-wide worker count used by the parallel loops below (>= 1).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls fn(i) for every i in [0, n). Work is split into contiguous static
/// chunks; callers write results by index so output never depends on the
/// schedule. Exceptions thrown by fn are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Independent random stream for replicate `index` under `seed`. Streams are
/// a pure function of (seed, index), so draws do not depend on scheduling.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

}  // namespace openscr
