#pragma once

#include <cstddef>

namespace imda {

/// Worker cap for kernel loops. Reads IMDA_THREADS once; defaults to the
/// OpenMP runtime's choice.
int worker_count();

/// Overrides the worker cap (mainly for tests checking thread-count
/// independence).
void set_worker_count(int workers);

}  // namespace imda
