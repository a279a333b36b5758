#include "filterlens/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace filterlens::kernels {
namespace {

constexpr std::size_t K = kFilterSize;

float max_abs(const float* x, std::size_t n) {
  float best = 0.0f;
  for (std::size_t i = 0; i < n; ++i) best = std::max(best, std::fabs(x[i]));
  return best;
}

void row_max_abs(const float* rows, std::size_t n_rows, float* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = max_abs(rows + r * K, K);
}

void column_sums(const float* rows, std::size_t n_rows, double* sums) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    for (std::size_t j = 0; j < K; ++j) sums[j] += static_cast<double>(row[j]);
  }
}

void centered_scatter(const float* rows, std::size_t n_rows, const double* mean,
                      double* scatter) {
  double d[K];
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    for (std::size_t j = 0; j < K; ++j) d[j] = static_cast<double>(row[j]) - mean[j];
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = 0; b < K; ++b) scatter[a * K + b] += d[a] * d[b];
    }
  }
}

void project(const float* rows, std::size_t n_rows, const double* mean,
             const double* basis, double* coeffs) {
  double d[K];
  for (std::size_t r = 0; r < n_rows; ++r) {
    const float* row = rows + r * K;
    for (std::size_t j = 0; j < K; ++j) d[j] = static_cast<double>(row[j]) - mean[j];
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < K; ++j) acc += d[j] * basis[k * K + j];
      coeffs[r * K + k] = acc;
    }
  }
}

double dot(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar",    max_abs, row_max_abs, column_sums,
                                 centered_scatter, project, dot};
  return table;
}

}  // namespace filterlens::kernels
