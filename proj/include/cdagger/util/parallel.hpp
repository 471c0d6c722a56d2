#pragma once

namespace cdagger {

/// Selects between the OpenMP kernels and their serial reference versions.
/// Both paths must produce bit-identical results.
enum class Execution { Serial, Parallel };

/// Number of OpenMP threads for parallel sections; 0 keeps the runtime default.
void set_thread_count(int n);
int thread_count();

}  // namespace cdagger
