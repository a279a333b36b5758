// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "filterlens/kernels/kernels.hpp"

namespace filterlens::kernels {
namespace {

constexpr std::size_t K = kFilterSize;

inline __m256 abs_ps(__m256 v) {
  return _mm256_andnot_ps(_mm256_set1_ps(-0.0f), v);
}

inline float hmax_ps(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
  return _mm_cvtss_f32(lo);
}

inline double hsum_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  return _mm_cvtsd_f64(lo);
}

// Widen 8 floats into two 4-lane double vectors.
inline void widen(const float* p, __m256d& lo, __m256d& hi) {
  __m256 v = _mm256_loadu_ps(p);
  lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
  hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
}

float max_abs(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_max_ps(acc, abs_ps(_mm256_loadu_ps(x + i)));
  float best = hmax_ps(acc);
  for (; i < n; ++i) best = std::max(best, std::fabs(x[i]));
  return best;
}

void row_max_abs(const float* rows, std::size_t n_rows, float* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    float m = hmax_ps(abs_ps(_mm256_loadu_ps(row)));
    out[r] = std::max(m, std::fabs(row[8]));
  }
}

void column_sums(const float* rows, std::size_t n_rows, double* sums) {
  __m256d acc_lo = _mm256_setzero_pd();
  __m256d acc_hi = _mm256_setzero_pd();
  double acc8 = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    __m256d lo, hi;
    widen(row, lo, hi);
    acc_lo = _mm256_add_pd(acc_lo, lo);
    acc_hi = _mm256_add_pd(acc_hi, hi);
    acc8 += static_cast<double>(row[8]);
  }
  alignas(32) double tmp[8];
  _mm256_store_pd(tmp, acc_lo);
  _mm256_store_pd(tmp + 4, acc_hi);
  for (std::size_t j = 0; j < 8; ++j) sums[j] += tmp[j];
  sums[8] += acc8;
}

void centered_scatter(const float* rows, std::size_t n_rows, const double* mean,
                      double* scatter) {
  const __m256d mean_lo = _mm256_loadu_pd(mean);
  const __m256d mean_hi = _mm256_loadu_pd(mean + 4);
  __m256d acc_lo[K], acc_hi[K];
  double acc8[K];
  for (std::size_t a = 0; a < K; ++a) {
    acc_lo[a] = _mm256_setzero_pd();
    acc_hi[a] = _mm256_setzero_pd();
    acc8[a] = 0.0;
  }
  alignas(32) double d[8];
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    __m256d lo, hi;
    widen(row, lo, hi);
    lo = _mm256_sub_pd(lo, mean_lo);
    hi = _mm256_sub_pd(hi, mean_hi);
    const double d8 = static_cast<double>(row[8]) - mean[8];
    _mm256_store_pd(d, lo);
    _mm256_store_pd(d + 4, hi);
    for (std::size_t a = 0; a < 8; ++a) {
      const __m256d da = _mm256_set1_pd(d[a]);
      acc_lo[a] = _mm256_fmadd_pd(da, lo, acc_lo[a]);
      acc_hi[a] = _mm256_fmadd_pd(da, hi, acc_hi[a]);
      acc8[a] += d[a] * d8;
    }
    const __m256d d8v = _mm256_set1_pd(d8);
    acc_lo[8] = _mm256_fmadd_pd(d8v, lo, acc_lo[8]);
    acc_hi[8] = _mm256_fmadd_pd(d8v, hi, acc_hi[8]);
    acc8[8] += d8 * d8;
  }
  alignas(32) double tmp[8];
  for (std::size_t a = 0; a < K; ++a) {
    _mm256_store_pd(tmp, acc_lo[a]);
    _mm256_store_pd(tmp + 4, acc_hi[a]);
    for (std::size_t b = 0; b < 8; ++b) scatter[a * K + b] += tmp[b];
    scatter[a * K + 8] += acc8[a];
  }
}

void project(const float* rows, std::size_t n_rows, const double* mean,
             const double* basis, double* coeffs) {
  // Column j of the basis as a vector over output components k.
  __m256d col_lo[K], col_hi[K];
  double col8[K];
  for (std::size_t j = 0; j < K; ++j) {
    col_lo[j] = _mm256_setr_pd(basis[0 * K + j], basis[1 * K + j], basis[2 * K + j],
                               basis[3 * K + j]);
    col_hi[j] = _mm256_setr_pd(basis[4 * K + j], basis[5 * K + j], basis[6 * K + j],
                               basis[7 * K + j]);
    col8[j] = basis[8 * K + j];
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    __m256d out_lo = _mm256_setzero_pd();
    __m256d out_hi = _mm256_setzero_pd();
    double out8 = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      const double dj = static_cast<double>(row[j]) - mean[j];
      const __m256d dv = _mm256_set1_pd(dj);
      out_lo = _mm256_fmadd_pd(dv, col_lo[j], out_lo);
      out_hi = _mm256_fmadd_pd(dv, col_hi[j], out_hi);
      out8 += dj * col8[j];
    }
    double* dst = coeffs + r * K;
    _mm256_storeu_pd(dst, out_lo);
    _mm256_storeu_pd(dst + 4, out_hi);
    dst[8] = out8;
  }
}

double dot(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d a_lo, a_hi, b_lo, b_hi;
    widen(a + i, a_lo, a_hi);
    widen(b + i, b_lo, b_hi);
    acc0 = _mm256_fmadd_pd(a_lo, b_lo, acc0);
    acc1 = _mm256_fmadd_pd(a_hi, b_hi, acc1);
  }
  double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2",           max_abs, row_max_abs, column_sums,
                                 centered_scatter, project, dot};
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
  return &table;
}

}  // namespace filterlens::kernels
