#pragma once

#include <cstddef>

namespace lexcurate {

/// Selects the kernel variant. `serial` is the reference implementation the
/// OpenMP kernels are tested against; both must produce identical results.
enum class Execution { serial, parallel };

/// Sets the OpenMP worker count for subsequent parallel kernels; 0 restores the runtime default.
void set_worker_count(int workers);
int worker_count();

/// Documents processed per batch by the streaming stages.
inline constexpr std::size_t kDefaultBatchSize = 4096;

}  // namespace lexcurate
