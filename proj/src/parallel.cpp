#include "lps/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lps::par {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace lps::par
