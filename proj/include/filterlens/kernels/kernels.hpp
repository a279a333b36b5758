#pragma once

// Data-parallel inner loops used by the analysis modules.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2/FMA variant. The active table is chosen once at first use from the
// CPU feature bits; FILTERLENS_SIMD=scalar forces the reference path.
// Inputs are float32 (checkpoint precision); all reductions accumulate in
// double.

#include <cstddef>
#include <span>
#include <string_view>

namespace filterlens::kernels {

inline constexpr std::size_t kFilterSize = 9;

struct KernelTable {
  std::string_view name;

  // max_i |x_i|; 0 for empty input.
  float (*max_abs)(const float* x, std::size_t n);

  // out[r] = max_j |rows[r*9 + j]| for r in [0, n_rows).
  void (*row_max_abs)(const float* rows, std::size_t n_rows, float* out);

  // sums[j] += sum_r rows[r*9 + j]
  void (*column_sums)(const float* rows, std::size_t n_rows, double* sums);

  // scatter[a*9 + b] += sum_r (x_ra - mean_a)(x_rb - mean_b), full 9x9.
  void (*centered_scatter)(const float* rows, std::size_t n_rows,
                           const double* mean, double* scatter);

  // coeffs[r*9 + k] = sum_j (rows[r*9 + j] - mean_j) * basis[k*9 + j]
  void (*project)(const float* rows, std::size_t n_rows, const double* mean,
                  const double* basis, double* coeffs);

  // sum_i a_i * b_i accumulated in double.
  double (*dot)(const float* a, const float* b, std::size_t n);
};

const KernelTable& scalar_table();

// Returns nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

}  // namespace filterlens::kernels
