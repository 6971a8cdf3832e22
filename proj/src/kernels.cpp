#include "fsrl/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace fsrl::kernels {

namespace {

// i-k-j order keeps the inner loop contiguous in B and C so it vectorizes.
inline void matmul_rows(const double* __restrict a, const double* __restrict b, double* __restrict c,
                        std::size_t row_begin, std::size_t row_end, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = row_begin; i < row_end; ++i) {
        double* __restrict ci = c + i * n;
        if (!accumulate) std::fill(ci, ci + n, 0.0);
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* __restrict bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// Row r of C = A^T B is sum_i A(i, r) * B(i, :).
inline void at_b_rows(const double* __restrict a, const double* __restrict b, double* __restrict c,
                      std::size_t row_begin, std::size_t row_end, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t r = row_begin; r < row_end; ++r) {
        double* __restrict cr = c + r * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double air = a[i * k + r];
            if (air == 0.0) continue;
            const double* __restrict bi = b + i * n;
            for (std::size_t j = 0; j < n; ++j) cr[j] += air * bi[j];
        }
    }
}

// C += A B^T as C(i, :) += sum_p A(i, p) * Bt(p, :) with Bt = B^T (n x k).
inline void a_bt_rows(const double* __restrict a, const double* __restrict bt, double* __restrict c,
                      std::size_t row_begin, std::size_t row_end, std::size_t k, std::size_t n) {
    for (std::size_t i = row_begin; i < row_end; ++i) {
        const double* ai = a + i * n;
        double* __restrict ci = c + i * k;
        for (std::size_t p = 0; p < n; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* __restrict bp = bt + p * k;
            for (std::size_t r = 0; r < k; ++r) ci[r] += aip * bp[r];
        }
    }
}

std::vector<double> transpose(const double* b, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = b[r * cols + c];
    }
    return t;
}

bool use_parallel(std::size_t work) {
    return work >= parallel_threshold && omp_get_max_threads() > 1 && !omp_in_parallel();
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                   bool accumulate) {
    matmul_rows(a, b, c, 0, m, k, n, accumulate);
}

void matmul_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                     bool accumulate) {
    const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        matmul_rows(a, b, c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, k, n, accumulate);
    }
}

void matmul_at_b_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    at_b_rows(a, b, c, 0, k, m, k, n);
}

void matmul_at_b_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        at_b_rows(a, b, c, static_cast<std::size_t>(r), static_cast<std::size_t>(r) + 1, m, k, n);
    }
}

void matmul_a_bt_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto bt = transpose(b, k, n);
    a_bt_rows(a, bt.data(), c, 0, m, k, n);
}

void matmul_a_bt_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto bt = transpose(b, k, n);
    const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        a_bt_rows(a, bt.data(), c, static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, k, n);
    }
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
            bool accumulate) {
    if (use_parallel(m * k * n)) {
        matmul_parallel(a, b, c, m, k, n, accumulate);
    } else {
        matmul_serial(a, b, c, m, k, n, accumulate);
    }
}

void matmul_at_b(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (use_parallel(m * k * n)) {
        matmul_at_b_parallel(a, b, c, m, k, n);
    } else {
        matmul_at_b_serial(a, b, c, m, k, n);
    }
}

void matmul_a_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (use_parallel(m * k * n)) {
        matmul_a_bt_parallel(a, b, c, m, k, n);
    } else {
        matmul_a_bt_serial(a, b, c, m, k, n);
    }
}

}  // namespace fsrl::kernels
