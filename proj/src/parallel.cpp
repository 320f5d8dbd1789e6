#include "pml/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace pml {
namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("PML_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

std::atomic<int>& threads() {
  static std::atomic<int> n{initial_thread_count()};
  return n;
}

}  // namespace

int thread_count() { return threads().load(); }

void set_thread_count(int n) { threads().store(n < 1 ? 1 : n); }

}  // namespace pml
