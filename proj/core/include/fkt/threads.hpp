#pragma once

namespace fkt {

/// Cap internal (Eigen/OpenMP) parallelism. 0 or 1 forces sequential
/// execution, which is the determinism-guaranteed default.
void set_max_threads(int n);

/// Apply the FKT_THREADS environment variable; unset means sequential.
void init_threads_from_env();

int max_threads();

}  // namespace fkt
