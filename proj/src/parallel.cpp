#include "polyproj/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace polyproj {

void set_thread_count(int n) {
  if (n <= 0) n = omp_get_num_procs();
  omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

int thread_count_from_env() {
  const char* s = std::getenv("POLYPROJ_THREADS");
  if (s == nullptr || *s == '\0') return 0;
  try {
    return std::stoi(s);
  } catch (...) {
    return 0;
  }
}

}  // namespace polyproj
