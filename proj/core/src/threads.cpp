#include "fkt/threads.hpp"

#include <Eigen/Core>
#include <cstdlib>
#include <string>

#if defined(FKT_HAVE_OPENMP)
#include <omp.h>
#endif

namespace fkt {

namespace {
int g_max_threads = 1;
}

void set_max_threads(int n) {
  if (n < 1) n = 1;
  g_max_threads = n;
  Eigen::setNbThreads(n);
#if defined(FKT_HAVE_OPENMP)
  omp_set_num_threads(n);
#endif
}

void init_threads_from_env() {
  int n = 1;
  if (const char* env = std::getenv("FKT_THREADS")) {
    try {
      n = std::stoi(env);
    } catch (...) {
      n = 1;
    }
  }
  set_max_threads(n);
}

int max_threads() { return g_max_threads; }

}  // namespace fkt
