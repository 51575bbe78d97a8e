#include "spiketempo/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace spiketempo {

int configured_threads() {
  int threads = omp_get_num_procs();
  if (const char* env = std::getenv("SPIKETEMPO_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1 && cap < threads) threads = cap;
    } catch (...) {
    }
  }
  return threads;
}

ThreadScope::ThreadScope(int threads) : previous_(omp_get_max_threads()) {
  omp_set_num_threads(threads < 1 ? 1 : threads);
}

ThreadScope::~ThreadScope() { omp_set_num_threads(previous_); }

}  // namespace spiketempo
