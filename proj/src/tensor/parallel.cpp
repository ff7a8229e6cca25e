#include "imda/tensor/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace imda {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("IMDA_THREADS"); env != nullptr && *env != '\0') {
    try {
      int value = std::stoi(env);
      if (value >= 1) return value;
    } catch (const std::exception&) {
      // fall through to the runtime default
    }
  }
  return omp_get_max_threads();
}

std::atomic<int>& workers() {
  static std::atomic<int> value{initial_workers()};
  return value;
}

}  // namespace

int worker_count() { return workers().load(std::memory_order_relaxed); }

void set_worker_count(int count) { workers().store(count < 1 ? 1 : count); }

}  // namespace imda
