#pragma once

#include <array>
#include <cstddef>

namespace filterlens {

// Eigendecomposition of a real symmetric 9x9 matrix by cyclic Jacobi
// rotations. Eigenvalues come back in non-increasing order; row i of
// `vectors` is the unit eigenvector for values[i].
struct SymEigen9 {
  std::array<double, 9> values{};
  std::array<double, 81> vectors{};
};

SymEigen9 sym_eigen9(const std::array<double, 81>& matrix);

}  // namespace filterlens
