#include "filterlens/filter_core.hpp"

#include <algorithm>
#include <cmath>

#include "filterlens/error.hpp"
#include "filterlens/kernels/kernels.hpp"

namespace filterlens {

FilterMatrix::FilterMatrix(std::vector<float> data, FilterOrigin origin)
    : data_(std::move(data)), origin_(std::move(origin)) {
  if (data_.size() % kFilterSize != 0) {
    throw ShapeError("filter matrix size " + std::to_string(data_.size()) +
                     " is not a multiple of 9");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw DataError("non-finite filter entry at row " + std::to_string(i / kFilterSize) +
                      ", column " + std::to_string(i % kFilterSize));
    }
  }
}

std::size_t SparseMask::sparse_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

FilterMatrix flatten_layer(const ConvLayerRecord& layer, std::string model_id) {
  if (!layer.is_3x3()) {
    throw KernelError(layer.layer_name + ": kernel " + std::to_string(layer.k1) + "x" +
                      std::to_string(layer.k2) + " is not 3x3");
  }
  if (layer.weights.size() != layer.element_count()) {
    throw ShapeError(layer.layer_name + ": weight count does not match shape");
  }
  // [c_out, c_in, 3, 3] row-major is already n x 9 with r = o * c_in + i.
  return FilterMatrix(layer.weights,
                      FilterOrigin{std::move(model_id), layer.layer_name, layer.depth_rank});
}

SparseMask sparse_mask(const FilterMatrix& fm) {
  const auto& k = kernels::active();
  const auto data = fm.data();
  SparseMask out;
  out.threshold = static_cast<double>(k.max_abs(data.data(), data.size())) / 100.0;
  std::vector<float> row_max(fm.rows());
  k.row_max_abs(data.data(), fm.rows(), row_max.data());
  out.mask.resize(fm.rows());
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    out.mask[r] = static_cast<double>(row_max[r]) <= out.threshold;
  }
  return out;
}

double sparsity_ratio(const FilterMatrix& fm) {
  if (fm.empty()) throw ShapeError("sparsity_ratio of an empty filter matrix");
  return static_cast<double>(sparse_mask(fm).sparse_count()) /
         static_cast<double>(fm.rows());
}

FilterMatrix normalize_filters(const FilterMatrix& fm) {
  const auto& k = kernels::active();
  std::vector<float> out(fm.data().begin(), fm.data().end());
  std::vector<float> row_max(fm.rows());
  k.row_max_abs(out.data(), fm.rows(), row_max.data());
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const float d = row_max[r];
    if (d == 0.0f) continue;
    float* row = out.data() + r * kFilterSize;
    for (std::size_t j = 0; j < kFilterSize; ++j) row[j] /= d;
  }
  return FilterMatrix(std::move(out), fm.origin());
}

FilterMatrix drop_sparse(const FilterMatrix& fm, const SparseMask& mask) {
  if (mask.mask.size() != fm.rows()) {
    throw ShapeError("sparse mask has " + std::to_string(mask.mask.size()) +
                     " entries for " + std::to_string(fm.rows()) + " filters");
  }
  std::vector<float> out;
  out.reserve(fm.data().size());
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    if (mask.mask[r]) continue;
    const auto row = fm.row(r);
    out.insert(out.end(), row.begin(), row.end());
  }
  if (out.empty()) {
    throw AllSparseError(fm.origin().layer_name.empty()
                             ? std::string("every filter is sparse")
                             : fm.origin().layer_name + ": every filter is sparse");
  }
  return FilterMatrix(std::move(out), fm.origin());
}

FilterMatrix concatenate(std::span<const FilterMatrix> parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.data().size();
  std::vector<float> out;
  out.reserve(total);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return FilterMatrix(std::move(out), parts.empty() ? FilterOrigin{} : parts.front().origin());
}

}  // namespace filterlens
