#include "qcreg/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>

#include <omp.h>

#include "qcreg/errors.hpp"

namespace qcreg {

void set_thread_count(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

int configure_threads_from_env() {
    const char *raw = std::getenv("QCREG_THREADS");
    if (raw == nullptr || *raw == '\0') return thread_count();
    const std::string_view text(raw);
    int n = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (ec != std::errc() || ptr != text.data() + text.size() || n < 0) {
        throw ConfigError("QCREG_THREADS must be a non-negative integer, got '" + std::string(text) + "'");
    }
    if (n == 0) omp_set_num_threads(omp_get_num_procs());
    else set_thread_count(n);
    return thread_count();
}

} // namespace qcreg
