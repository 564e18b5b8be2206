#pragma once

#include <cstddef>
#include <functional>

namespace smg {

/// Caps the worker count used by parallel_for; 0 means hardware concurrency.
void set_max_jobs(unsigned jobs);
unsigned max_jobs();

/// Runs fn(i) for i in [0, n) across up to max_jobs() threads. Exceptions from
/// workers are rethrown on the caller after all workers join (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace smg
