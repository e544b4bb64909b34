// Compiled with -mavx2 -mfma. Only reached through the runtime dispatcher
// after a cpuid check.

#include <immintrin.h>

#include "perturbopt/simd/kernels.hpp"

namespace perturbopt::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Wide rows: vectorize along the row.
template <bool Distance>
double row_reduce(const double* row, const double* x, std::size_t dim) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= dim; j += 8) {
    __m256d a0 = _mm256_loadu_pd(row + j);
    __m256d a1 = _mm256_loadu_pd(row + j + 4);
    const __m256d b0 = _mm256_loadu_pd(x + j);
    const __m256d b1 = _mm256_loadu_pd(x + j + 4);
    if constexpr (Distance) {
      a0 = _mm256_sub_pd(a0, b0);
      a1 = _mm256_sub_pd(a1, b1);
      acc0 = _mm256_fmadd_pd(a0, a0, acc0);
      acc1 = _mm256_fmadd_pd(a1, a1, acc1);
    } else {
      acc0 = _mm256_fmadd_pd(a0, b0, acc0);
      acc1 = _mm256_fmadd_pd(a1, b1, acc1);
    }
  }
  for (; j + 4 <= dim; j += 4) {
    __m256d a = _mm256_loadu_pd(row + j);
    const __m256d b = _mm256_loadu_pd(x + j);
    if constexpr (Distance) {
      a = _mm256_sub_pd(a, b);
      acc0 = _mm256_fmadd_pd(a, a, acc0);
    } else {
      acc0 = _mm256_fmadd_pd(a, b, acc0);
    }
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < dim; ++j) {
    if constexpr (Distance) {
      const double diff = row[j] - x[j];
      acc += diff * diff;
    } else {
      acc += row[j] * x[j];
    }
  }
  return acc;
}

// Narrow rows: four rows per lane group, coordinates broadcast.
template <bool Distance>
void narrow_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                 double* out) {
  std::size_t r = 0;
  const __m256i stride = _mm256_set_epi64x(3 * static_cast<long long>(dim),
                                           2 * static_cast<long long>(dim),
                                           static_cast<long long>(dim), 0);
  for (; r + 4 <= n_rows; r += 4) {
    const double* base = rows + r * dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < dim; ++j) {
      __m256d a = _mm256_i64gather_pd(base + j, stride, 8);
      const __m256d b = _mm256_broadcast_sd(x + j);
      if constexpr (Distance) {
        a = _mm256_sub_pd(a, b);
        acc = _mm256_fmadd_pd(a, a, acc);
      } else {
        acc = _mm256_fmadd_pd(a, b, acc);
      }
    }
    _mm256_storeu_pd(out + r, acc);
  }
  for (; r < n_rows; ++r) {
    const double* row = rows + r * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      if constexpr (Distance) {
        const double diff = row[j] - x[j];
        acc = __builtin_fma(diff, diff, acc);
      } else {
        acc = __builtin_fma(row[j], x[j], acc);
      }
    }
    out[r] = acc;
  }
}

constexpr std::size_t kWideRow = 8;

}  // namespace

void dot_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
              double* out) {
  if (dim < kWideRow) {
    narrow_rows<false>(rows, n_rows, dim, x, out);
    return;
  }
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = row_reduce<false>(rows + r * dim, x, dim);
}

void sqdist_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                 double* out) {
  if (dim < kWideRow) {
    narrow_rows<true>(rows, n_rows, dim, x, out);
    return;
  }
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = row_reduce<true>(rows + r * dim, x, dim);
}

}  // namespace perturbopt::simd::avx2
