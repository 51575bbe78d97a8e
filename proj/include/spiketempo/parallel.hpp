#pragma once

namespace spiketempo {

// Thread cap from SPIKETEMPO_THREADS, or the OpenMP default when unset.
int configured_threads();

// Applies a thread count for the lifetime of the scope and restores the
// previous setting afterwards.
class ThreadScope {
 public:
  explicit ThreadScope(int threads);
  ~ThreadScope();
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
};

}  // namespace spiketempo
