#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace sarlab::nn {

// Register-blocked GEMM kernels for the convolution layers. All
// matrices are dense row-major. Accumulation order is fixed, so results
// are bit-reproducible run to run.
//
// The microkernel uses GCC/Clang vector extensions: the accumulator
// tile lives in SSA vector values the compiler must keep in registers,
// which the autovectorizer does not reliably do for this loop shape.

namespace gemm_detail {

template <typename T>
struct VecTraits {
    using V __attribute__((vector_size(64))) = T;
    static constexpr std::size_t lanes = 64 / sizeof(T);
};

template <typename T>
inline typename VecTraits<T>::V vload(const T* p) {
    typename VecTraits<T>::V v;
    __builtin_memcpy(&v, p, sizeof(v));
    return v;
}

template <typename T>
inline void vstore(T* p, typename VecTraits<T>::V v) {
    __builtin_memcpy(p, &v, sizeof(v));
}

// C[MR x 2 vectors] += A[MR rows] * B[K x 2-vector slice].
// transposed_a selects A[k*lda + row] (A stored [K x M]).
template <typename T, int MR, bool transposed_a>
inline void micro_kernel(std::size_t K, const T* __restrict a, std::size_t lda, const T* __restrict b,
                         std::size_t ldb, T* __restrict c, std::size_t ldc) {
    using V = typename VecTraits<T>::V;
    constexpr std::size_t L = VecTraits<T>::lanes;

    V acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        acc[r][0] = vload(c + r * ldc);
        acc[r][1] = vload(c + r * ldc + L);
    }
    for (std::size_t k = 0; k < K; ++k) {
        const V b0 = vload(b + k * ldb);
        const V b1 = vload(b + k * ldb + L);
        for (int r = 0; r < MR; ++r) {
            const T av = transposed_a ? a[k * lda + r] : a[r * lda + k];
            acc[r][0] += av * b0;
            acc[r][1] += av * b1;
        }
    }
    for (int r = 0; r < MR; ++r) {
        vstore(c + r * ldc, acc[r][0]);
        vstore(c + r * ldc + L, acc[r][1]);
    }
}

// Shared driver. Panels of B are packed contiguously so the microkernel
// streams one small buffer instead of striding across pages of the
// large activation matrices.
template <typename T, bool transposed_a>
void gemm_driver(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
                 std::size_t ldb, T* C, std::size_t ldc) {
    constexpr std::size_t kNR = 2 * VecTraits<T>::lanes;  // microkernel column tile
    constexpr std::size_t NC = 32 * kNR;                  // packed column panel
    constexpr std::size_t KC = 256;                       // packed k panel

    thread_local std::vector<T> pack;

    auto a_block = [&](std::size_t i0, std::size_t k0) {
        return transposed_a ? A + k0 * lda + i0 : A + i0 * lda + k0;
    };

    const std::size_t n_main = N - N % kNR;
    for (std::size_t j0 = 0; j0 < n_main; j0 += NC) {
        const std::size_t jn = std::min(NC, n_main - j0);
        for (std::size_t k0 = 0; k0 < K; k0 += KC) {
            const std::size_t kn = std::min(KC, K - k0);
            pack.resize(kn * jn);
            for (std::size_t k = 0; k < kn; ++k) {
                const T* src = B + (k0 + k) * ldb + j0;
                std::memcpy(pack.data() + k * jn, src, jn * sizeof(T));
            }
            std::size_t i0 = 0;
            for (; i0 + 4 <= M; i0 += 4)
                for (std::size_t jj = 0; jj < jn; jj += kNR)
                    micro_kernel<T, 4, transposed_a>(kn, a_block(i0, k0), lda, pack.data() + jj, jn,
                                                     C + i0 * ldc + j0 + jj, ldc);
            const std::size_t rows_left = M - i0;
            if (rows_left) {
                auto tail = [&](auto mr_tag) {
                    constexpr int MR = decltype(mr_tag)::value;
                    for (std::size_t jj = 0; jj < jn; jj += kNR)
                        micro_kernel<T, MR, transposed_a>(kn, a_block(i0, k0), lda, pack.data() + jj, jn,
                                                          C + i0 * ldc + j0 + jj, ldc);
                };
                if (rows_left == 3) tail(std::integral_constant<int, 3>{});
                else if (rows_left == 2) tail(std::integral_constant<int, 2>{});
                else tail(std::integral_constant<int, 1>{});
            }
        }
    }
    if (n_main < N) {
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const T a = transposed_a ? A[k * lda + i] : A[i * lda + k];
                const T* brow = B + k * ldb;
                for (std::size_t j = n_main; j < N; ++j) C[i * ldc + j] += a * brow[j];
            }
        }
    }
}

}  // namespace gemm_detail

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
    gemm_detail::gemm_driver<T, false>(M, N, K, A, lda, B, ldb, C, ldc);
}

// C[M x N] += A^T * B with A stored [K x M] row-major
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
    gemm_detail::gemm_driver<T, true>(M, N, K, A, lda, B, ldb, C, ldc);
}

// C[M x N] += A * B^T with B stored [N x K] row-major (blocked dot
// products over the shared contiguous K axis). Lane accumulators fix
// the reduction order while still vectorizing.
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc) {
    using V = typename gemm_detail::VecTraits<T>::V;
    constexpr std::size_t L = gemm_detail::VecTraits<T>::lanes;
    const std::size_t k_main = K - K % L;

    for (std::size_t i = 0; i < M; ++i) {
        const T* __restrict arow = A + i * lda;
        std::size_t j = 0;
        for (; j + 2 <= N; j += 2) {
            const T* __restrict b0 = B + j * ldb;
            const T* __restrict b1 = B + (j + 1) * ldb;
            V l0 = {}, l1 = {};
            for (std::size_t k = 0; k < k_main; k += L) {
                const V av = gemm_detail::vload(arow + k);
                l0 += av * gemm_detail::vload(b0 + k);
                l1 += av * gemm_detail::vload(b1 + k);
            }
            T s0 = 0, s1 = 0;
            for (std::size_t l = 0; l < L; ++l) {
                s0 += l0[l];
                s1 += l1[l];
            }
            for (std::size_t k = k_main; k < K; ++k) {
                s0 += arow[k] * b0[k];
                s1 += arow[k] * b1[k];
            }
            C[i * ldc + j] += s0;
            C[i * ldc + j + 1] += s1;
        }
        for (; j < N; ++j) {
            const T* __restrict brow = B + j * ldb;
            V lv = {};
            for (std::size_t k = 0; k < k_main; k += L) lv += gemm_detail::vload(arow + k) * gemm_detail::vload(brow + k);
            T s = 0;
            for (std::size_t l = 0; l < L; ++l) s += lv[l];
            for (std::size_t k = k_main; k < K; ++k) s += arow[k] * brow[k];
            C[i * ldc + j] += s;
        }
    }
}

}  // namespace sarlab::nn
