#pragma once

// Centered SVD basis of 3x3 filter populations.
//
// The SVD of the centered n x 9 matrix is obtained from the eigenvectors of
// its 9x9 scatter matrix (X - mean)^T (X - mean), accumulated in double in
// fixed-size row blocks. sigma_i^2 is the i-th scatter eigenvalue, so the
// explained variance is a_i = sigma_i^2 / (n - 1) and the ratio is a / |a|_1.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "filterlens/filter_core.hpp"

namespace filterlens {

struct PcaModel {
  std::array<double, 9> mean{};
  std::array<double, 81> components{};  // row i = basis vector v_i
  std::array<double, 9> singular_values{};
  std::array<double, 9> explained_variance_ratio{};
  std::size_t sample_count = 0;
  // Zero total variance: explained_variance_ratio is all zeros.
  bool degenerate = false;

  std::span<const double, 9> component(std::size_t i) const {
    return std::span<const double, 9>(components.data() + 9 * i, 9);
  }

  // Stable fingerprint of mean, components and sample count; carried by
  // CoefficientMatrix so coefficients are never mixed across bases.
  std::string basis_id() const;
};

struct CoefficientMatrix {
  std::vector<double> coeffs;  // n x 9, row r = coefficients of filter r
  std::string basis_ref;

  std::size_t rows() const { return coeffs.size() / 9; }
  std::span<const double, 9> row(std::size_t r) const {
    return std::span<const double, 9>(coeffs.data() + 9 * r, 9);
  }
};

// Throws SampleCountError when fm has fewer than 2 rows.
PcaModel fit_pca(const FilterMatrix& fm);

// Same model as fit_pca on the row-wise concatenation of the populations,
// without materializing it. Callers are expected to pass sparse-dropped,
// normalized filters.
PcaModel fit_shared_basis(std::span<const FilterMatrix> populations);

CoefficientMatrix project(const PcaModel& model, const FilterMatrix& fm);

// rows = sum_i c_i v_i + mean. Throws BasisMismatchError when cm was
// produced by a different model.
FilterMatrix reconstruct(const PcaModel& model, const CoefficientMatrix& cm);

std::string pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const std::string& text);
void save_pca_model(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca_model(const std::filesystem::path& path);

}  // namespace filterlens
