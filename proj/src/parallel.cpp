#include "mrtts/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mrtts::parallel {

#ifdef _OPENMP
bool available() { return true; }
int max_threads() { return omp_get_max_threads(); }
void set_num_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }
#else
bool available() { return false; }
int max_threads() { return 1; }
void set_num_threads(int) {}
#endif

}  // namespace mrtts::parallel
