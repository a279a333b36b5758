#pragma once

// Flattened 3x3 filter matrices and the sparse-filter criterion.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "filterlens/weights_io.hpp"

namespace filterlens {

inline constexpr std::size_t kFilterSize = 9;

struct FilterOrigin {
  std::string model_id;
  std::string layer_name;
  std::size_t depth_rank = 0;
};

// n x 9 row-major matrix, one flattened 3x3 filter per row. All entries are
// finite; construction rejects anything else.
class FilterMatrix {
 public:
  FilterMatrix() = default;
  explicit FilterMatrix(std::vector<float> data, FilterOrigin origin = {});

  std::size_t rows() const { return data_.size() / kFilterSize; }
  bool empty() const { return data_.empty(); }
  std::span<const float> data() const { return data_; }
  std::span<const float, kFilterSize> row(std::size_t r) const {
    return std::span<const float, kFilterSize>(data_.data() + r * kFilterSize, kFilterSize);
  }
  const FilterOrigin& origin() const { return origin_; }

  // Moves the storage out; the matrix is left empty.
  std::vector<float> release() && { return std::move(data_); }

 private:
  std::vector<float> data_;
  FilterOrigin origin_;
};

struct SparseMask {
  std::vector<bool> mask;  // true = sparse
  double threshold = 0.0;  // max |W| / 100 of the source matrix

  std::size_t sparse_count() const;
};

// Row r = o * c_in + i holds filter (o, i) in row-major spatial order.
// Throws KernelError unless k1 = k2 = 3.
FilterMatrix flatten_layer(const ConvLayerRecord& layer, std::string model_id = {});

// A filter is sparse when max|F| <= max|W| / 100, W being the whole matrix.
// An all-zero matrix has threshold 0 and every row sparse.
SparseMask sparse_mask(const FilterMatrix& fm);

double sparsity_ratio(const FilterMatrix& fm);

// Divides each row by its own max-abs entry; all-zero rows pass through.
FilterMatrix normalize_filters(const FilterMatrix& fm);

// Rows whose mask entry is false, in order. Throws AllSparseError when no row
// survives and ShapeError when the mask length differs from fm.rows().
FilterMatrix drop_sparse(const FilterMatrix& fm, const SparseMask& mask);

// Row-wise concatenation; the origin of the first input is kept.
FilterMatrix concatenate(std::span<const FilterMatrix> parts);

}  // namespace filterlens
