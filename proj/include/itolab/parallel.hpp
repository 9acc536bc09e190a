#pragma once

#include <cstddef>
#include <functional>

namespace itolab {

/// Worker count used when a call does not specify one. Initialised from
/// ITO_LAB_THREADS, else 1.
int default_threads();
void set_default_threads(int n);

/// Runs fn(begin, end) over [0, n) split into fixed blocks of `block` items.
/// Block boundaries do not depend on the worker count, so per-block results
/// reduced in block order are identical for any number of threads.
void parallel_for(std::size_t n, std::size_t block,
                  const std::function<void(std::size_t begin, std::size_t end)>& fn,
                  int threads = 0);

}  // namespace itolab
