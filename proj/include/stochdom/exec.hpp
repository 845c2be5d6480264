#pragma once

namespace stochdom {

/// Selects the OpenMP kernel or the serial reference loop. Both produce
/// bit-identical results; the serial path is kept for testing and benchmarks.
enum class Exec { Serial, Parallel };

/// Caps OpenMP worker threads for subsequent parallel kernels (k <= 0 keeps the default).
void set_max_threads(int k);
int max_threads();

} // namespace stochdom
