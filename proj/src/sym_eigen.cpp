#include "filterlens/sym_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace filterlens {
namespace {

constexpr std::size_t N = 9;
constexpr int kMaxSweeps = 64;

double off_diagonal_norm(const std::array<double, 81>& a) {
  double s = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t q = p + 1; q < N; ++q) s += a[p * N + q] * a[p * N + q];
  }
  return std::sqrt(s);
}

}  // namespace

SymEigen9 sym_eigen9(const std::array<double, 81>& matrix) {
  std::array<double, 81> a = matrix;
  // Columns of v accumulate the rotations.
  std::array<double, 81> v{};
  for (std::size_t i = 0; i < N; ++i) v[i * N + i] = 1.0;

  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::fabs(x));

  for (int sweep = 0; sweep < kMaxSweeps && scale > 0.0; ++sweep) {
    if (off_diagonal_norm(a) <= 1e-300 + 1e-17 * scale) break;
    for (std::size_t p = 0; p < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        const double apq = a[p * N + q];
        if (apq == 0.0) continue;
        const double app = a[p * N + p];
        const double aqq = a[q * N + q];
        // Skip rotations that can no longer change the diagonal.
        if (sweep > 3 && std::fabs(apq) * 1e18 < std::fabs(app) &&
            std::fabs(apq) * 1e18 < std::fabs(aqq)) {
          a[p * N + q] = a[q * N + p] = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < N; ++k) {
          const double akp = a[k * N + p];
          const double akq = a[k * N + q];
          a[k * N + p] = c * akp - s * akq;
          a[k * N + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double apk = a[p * N + k];
          const double aqk = a[q * N + k];
          a[p * N + k] = c * apk - s * aqk;
          a[q * N + k] = s * apk + c * aqk;
        }
        a[p * N + q] = a[q * N + p] = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
          const double vkp = v[k * N + p];
          const double vkq = v[k * N + q];
          v[k * N + p] = c * vkp - s * vkq;
          v[k * N + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<std::size_t, N> order;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i * N + i] > a[j * N + j];
  });

  SymEigen9 out;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t col = order[i];
    out.values[i] = a[col * N + col];
    for (std::size_t k = 0; k < N; ++k) out.vectors[i * N + k] = v[k * N + col];
  }
  return out;
}

}  // namespace filterlens
