#include "kamamsr/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kamamsr {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace kamamsr
