#pragma once

// Dense row-major matrix products. Every kernel has a serial reference and an
// OpenMP version that splits the output rows across threads; both accumulate
// in the same order per output element, so their results are bit-identical.

#include <cstddef>

namespace fsrl::kernels {

// C (m x n) = A (m x k) * B (k x n); C += ... when accumulate is set.
void matmul_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate = false);
void matmul_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                     bool accumulate = false);

// C (k x n) += A^T * B with A (m x k), B (m x n).
void matmul_at_b_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

// C (m x k) += A * B^T with A (m x n), B (k x n).
void matmul_a_bt_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

// Dispatch: parallel above `parallel_threshold` multiply-adds when more than
// one thread is available and we are not already inside a parallel region.
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate = false);
void matmul_at_b(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

inline constexpr std::size_t parallel_threshold = std::size_t{1} << 18;

}  // namespace fsrl::kernels
