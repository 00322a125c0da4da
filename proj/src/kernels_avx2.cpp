#include "personaprop/kernels.hpp"

// AVX2 kernel variants. Compiled with -mavx2 -mfma on x86-64 only; the
// dispatcher checks CPU support before handing these out.

#if defined(__x86_64__) && defined(__AVX2__)

#include <immintrin.h>

#include <cmath>

namespace personaprop::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline __m256d abs_pd(__m256d v) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(v, mask);
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double max_abs_diff_avx2(const double* x, const double* y, std::size_t n) {
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    best = _mm256_max_pd(best, abs_pd(d));
  }
  __m128d lo = _mm256_castpd256_pd128(best);
  __m128d hi = _mm256_extractf128_pd(best, 1);
  lo = _mm_max_pd(lo, hi);
  double m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) m = std::max(m, std::fabs(x[i] - y[i]));
  return m;
}

double sum_abs_diff_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, abs_pd(d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(x[i] - y[i]);
  return total;
}

void csr_mean_gather_avx2(const std::uint32_t* offsets, const std::uint32_t* indices,
                          const double* x, double* out, std::size_t n_rows) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::uint32_t begin = offsets[r];
    const std::uint32_t end = offsets[r + 1];
    if (begin == end) {
      out[r] = 0.0;
      continue;
    }
    __m256d acc = _mm256_setzero_pd();
    std::uint32_t k = begin;
    for (; k + 4 <= end; k += 4) {
      __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(indices + k));
      acc = _mm256_add_pd(acc, _mm256_i32gather_pd(x, idx, 8));
    }
    double total = hsum(acc);
    for (; k < end; ++k) total += x[indices[k]];
    out[r] = total / static_cast<double>(end - begin);
  }
}

void csr_weighted_gather_avx2(const std::uint32_t* offsets, const std::uint32_t* indices,
                              const double* w, const double* x, double* out,
                              std::size_t n_rows) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::uint32_t begin = offsets[r];
    const std::uint32_t end = offsets[r + 1];
    __m256d acc = _mm256_setzero_pd();
    std::uint32_t k = begin;
    for (; k + 4 <= end; k += 4) {
      __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(indices + k));
      __m256d xs = _mm256_i32gather_pd(x, idx, 8);
      __m256d ws = _mm256_i32gather_pd(w, idx, 8);
      acc = _mm256_fmadd_pd(ws, xs, acc);
    }
    double total = hsum(acc);
    for (; k < end; ++k) {
      const std::uint32_t j = indices[k];
      total += w[j] * x[j];
    }
    out[r] = total;
  }
}

constexpr Ops kAvx2Ops = {
    "avx2",
    sum_avx2,
    axpy_avx2,
    scale_avx2,
    max_abs_diff_avx2,
    sum_abs_diff_avx2,
    csr_mean_gather_avx2,
    csr_weighted_gather_avx2,
};

}  // namespace

const Ops* avx2_ops() {
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2Ops;
  return nullptr;
}

}  // namespace personaprop::kernels

#else

namespace personaprop::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace personaprop::kernels

#endif
