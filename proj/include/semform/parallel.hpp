#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semform {

/// Runs body(i) for i in [0, n) across OpenMP threads. `max_threads` <= 0
/// uses the runtime default. Exceptions are captured per index and the one
/// from the lowest index is rethrown after the loop, so failures are
/// reported the same way regardless of scheduling.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int max_threads = 0) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#ifdef _OPENMP
    const int threads = max_threads > 0 ? max_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Same contract as parallel_for, but collects every failure instead of
/// stopping at the first. Returns per-index exception pointers (null on
/// success).
template <class Body>
std::vector<std::exception_ptr> parallel_for_collect(std::size_t n, Body&& body, int max_threads = 0) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#ifdef _OPENMP
    const int threads = max_threads > 0 ? max_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    return errors;
}

}  // namespace semform
