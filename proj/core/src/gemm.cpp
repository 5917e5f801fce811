#include <algorithm>
#include <cstddef>

#include "lvsr/conv.hpp"

namespace lvsr::detail {

namespace {

constexpr std::size_t kColBlock = 256;
constexpr std::size_t kDepthBlock = 256;

template <typename T, bool TransA>
inline T a_at(const T* a, std::size_t lda, std::size_t i, std::size_t p) {
  return TransA ? a[p * lda + i] : a[i * lda + p];
}

template <typename T, bool TransA>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
               std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t jn = std::min(kColBlock, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
      const std::size_t pn = std::min(kDepthBlock, k - p0);
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        T* __restrict c0 = c + (i + 0) * ldc + j0;
        T* __restrict c1 = c + (i + 1) * ldc + j0;
        T* __restrict c2 = c + (i + 2) * ldc + j0;
        T* __restrict c3 = c + (i + 3) * ldc + j0;
        for (std::size_t p = p0; p < p0 + pn; ++p) {
          const T a0 = a_at<T, TransA>(a, lda, i + 0, p);
          const T a1 = a_at<T, TransA>(a, lda, i + 1, p);
          const T a2 = a_at<T, TransA>(a, lda, i + 2, p);
          const T a3 = a_at<T, TransA>(a, lda, i + 3, p);
          const T* __restrict bp = b + p * ldb + j0;
          for (std::size_t j = 0; j < jn; ++j) {
            const T bv = bp[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        T* __restrict ci = c + i * ldc + j0;
        for (std::size_t p = p0; p < p0 + pn; ++p) {
          const T av = a_at<T, TransA>(a, lda, i, p);
          const T* __restrict bp = b + p * ldb + j0;
          for (std::size_t j = 0; j < jn; ++j) ci[j] += av * bp[j];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
                     const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (trans_a) {
    gemm_impl<T, true>(m, n, k, a, lda, b, ldb, c, ldc);
  } else {
    gemm_impl<T, false>(m, n, k, a, lda, b, ldb, c, ldc);
  }
}

template void gemm_accumulate<float>(std::size_t, std::size_t, std::size_t, const float*, std::size_t, bool,
                                     const float*, std::size_t, float*, std::size_t);
template void gemm_accumulate<double>(std::size_t, std::size_t, std::size_t, const double*, std::size_t, bool,
                                      const double*, std::size_t, double*, std::size_t);

}  // namespace lvsr::detail
