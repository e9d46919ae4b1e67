#pragma once

namespace qcreg {

/// Reads QCREG_THREADS (unset or 0 = OpenMP default) and applies it.
/// Returns the resulting worker count. Throws ConfigError on a malformed value.
int configure_threads_from_env();

void set_thread_count(int threads);
int thread_count();

} // namespace qcreg
