#ifndef PANELKIT_PARALLEL_HPP
#define PANELKIT_PARALLEL_HPP

#include <cstddef>
#include <cstdint>
#include <exception>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace panelkit {

/// Execution policy for the data-parallel kernels (bootstrap replicates,
/// per-cohort fits, simulation batches). Serial is the reference path; the
/// parallel path must produce bit-identical results because every loop body
/// writes only to its own pre-allocated slot.
enum class ExecMode { Serial, Parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Runs body(i) for i in [0, n). Exceptions thrown inside parallel bodies are
/// captured per index and the lowest-index one is rethrown after the loop, so
/// error reporting does not depend on thread scheduling.
template <typename Body>
void for_each_index(std::size_t n, ExecMode mode, Body&& body) {
    if (n == 0) return;
#ifdef _OPENMP
    if (mode == ExecMode::Parallel && n > 1) {
        std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (errors[i]) std::rethrow_exception(errors[i]);
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

} // namespace panelkit

#endif
