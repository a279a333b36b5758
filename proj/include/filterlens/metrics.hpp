#pragma once

// Per-layer quality metrics: sparsity, variance entropy and filterbank
// orthogonality.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filterlens/filter_core.hpp"
#include "filterlens/weights_io.hpp"

namespace filterlens {

enum class MetricFlag : std::uint8_t {
  kAllSparse = 1u << 0,
  kZeroVariance = 1u << 1,
  kSingleFilterbank = 1u << 2,
};

class MetricFlags {
 public:
  MetricFlags() = default;
  void set(MetricFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
  bool has(MetricFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  bool empty() const { return bits_ == 0; }
  MetricFlags& operator|=(MetricFlags o) {
    bits_ |= o.bits_;
    return *this;
  }
  bool operator==(const MetricFlags&) const = default;

  // "ALL_SPARSE|ZERO_VARIANCE"; empty string when no flag is set.
  std::string to_string() const;
  static MetricFlags parse(const std::string& text);

 private:
  std::uint8_t bits_ = 0;
};

// -sum_i r_i log10 r_i with 0 log 0 = 0. Ranges over [0, log10 9].
double ratio_entropy(std::span<const double, 9> ratios);

struct EntropyResult {
  double value = 0.0;
  MetricFlags flags;
};

// Entropy of the explained-variance ratios of the raw (unnormalized) filters
// after dropping sparse ones. Reports 0 with ALL_SPARSE when fewer than two
// filters survive, and 0 with ZERO_VARIANCE when the survivors have no
// variance (or the whole layer is zero).
EntropyResult variance_entropy(const FilterMatrix& fm);

// 1 - |W W^T - I|_1 / (c (c - 1)) over unit-length filterbanks, |.|_1 being
// the entrywise sum. Zero-norm banks are dropped first; std::nullopt when
// fewer than two remain.
std::optional<double> orthogonality(const ConvLayerRecord& layer);

struct LayerMetrics {
  FilterOrigin origin;
  double relative_depth = 0.0;
  std::size_t n_filters = 0;
  double sparsity = 0.0;
  double variance_entropy = 0.0;
  std::optional<double> orthogonality;
  MetricFlags flags;

  bool operator==(const LayerMetrics& o) const;
};

LayerMetrics layer_metrics(const ConvLayerRecord& layer, double relative_depth,
                           const std::string& model_id = {});

// Metrics for every 3x3 layer of the model, in depth order, with relative
// depth rank / (L - 1). Throws EmptySelectionError like select_3x3_layers.
std::vector<LayerMetrics> model_metrics(const ModelRecord& model);

inline constexpr const char* kMetricsCsvHeader =
    "model_id,layer_name,depth_rank,relative_depth,n_filters,sparsity,variance_entropy,"
    "orthogonality,flags";

// Reals are written with 17 significant digits so parsing reproduces them
// exactly; a missing orthogonality is an empty field.
void write_metrics_csv(std::ostream& out, std::span<const LayerMetrics> rows);
std::vector<LayerMetrics> read_metrics_csv(std::istream& in);

}  // namespace filterlens
