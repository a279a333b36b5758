#pragma once

// Distribution shift between two filter populations: depth grouping,
// per-axis coefficient histograms and the variance-weighted symmetric KL
// divergence sum_i w_i sum_x P_i(x) ln(P_i/Q_i) + Q_i(x) ln(Q_i/P_i).

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filterlens/pca.hpp"
#include "filterlens/weights_io.hpp"

namespace filterlens {

inline constexpr std::size_t kDecileCount = 10;
inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kHistogramSmoothing = 1e-9;
inline constexpr double kDegenerateRangePad = 1e-9;

inline constexpr const char* kFirstLayerGroup = "FIRST_LAYER";
std::string decile_group(std::size_t decile);  // "DECILE_3"

struct DepthAssignment {
  double relative_depth = 0.0;
  std::size_t decile = 0;
  bool first_layer = false;
};

// Relative depth r = rank / (L - 1) (0 when L = 1). Deciles are the
// right-closed tenths (k/10, (k+1)/10], with r = 0 folded into decile 0, so
// for L = 11 the ranks map to 0,0,1,...,9 and the last layer is always
// decile 9. Rank 0 is additionally tagged as the first layer.
DepthAssignment assign_depth(std::size_t depth_rank, std::size_t layer_count);
std::vector<DepthAssignment> assign_depth_groups(std::span<const ConvLayerRecord> layers);

struct LayerRef {
  std::string model_id;
  std::string layer_name;
  bool operator==(const LayerRef&) const = default;
};

struct DepthGroup {
  std::string label;
  std::vector<LayerRef> members;
};

// FIRST_LAYER followed by DECILE_0..DECILE_9 over the 3x3 layers of every
// model. With exclude_first_from_deciles, rank-0 layers only appear in
// FIRST_LAYER.
std::vector<DepthGroup> depth_groups(std::span<const ModelRecord> models,
                                     bool exclude_first_from_deciles);

struct AxisHistogram {
  std::vector<double> edges;          // bins + 1, strictly increasing
  std::vector<double> probabilities;  // bins, sums to 1
};

struct HistogramSet {
  std::array<AxisHistogram, 9> axes;
  std::size_t sample_count = 0;
  double smoothing_epsilon = kHistogramSmoothing;
  std::string basis_ref;
};

// Shared uniform edges per axis over the pooled [min, max] of both inputs
// (a zero-width range is padded by kDegenerateRangePad). Bins are
// left-closed except the last, which includes the maximum. Every bin gets
// kHistogramSmoothing added before renormalization.
std::pair<HistogramSet, HistogramSet> build_histograms(const CoefficientMatrix& p,
                                                       const CoefficientMatrix& q,
                                                       std::size_t bins);

struct ShiftReport {
  std::string group;
  double kl = 0.0;
  std::array<double, 9> per_axis{};
  std::array<double, 9> weights{};
  std::size_t n_p = 0;
  std::size_t n_q = 0;
  std::vector<std::string> flags;  // "MISSING" when either side is empty

  bool operator==(const ShiftReport&) const = default;
};

// Throws BinningError when the edges differ on any axis.
ShiftReport symmetric_kl(const HistogramSet& p, const HistogramSet& q,
                         std::span<const double, 9> weights);

enum class Grouping { kByDepth, kByDataset };

struct ShiftOptions {
  Grouping grouping = Grouping::kByDepth;
  std::size_t bins = kDefaultBins;
  bool exclude_first_from_deciles = false;
  // Project onto this basis instead of fitting a shared one.
  std::optional<PcaModel> basis;
};

struct ShiftResult {
  PcaModel basis;
  std::vector<ShiftReport> reports;
  // Histograms of every P filter against every Q filter, for plotting.
  HistogramSet overall_p;
  HistogramSet overall_q;
};

// Flattens, sparse-drops and normalizes every 3x3 layer (fully sparse layers
// are skipped), fits the shared basis on P and Q together, projects both and
// compares them group by group with weights = the basis' explained-variance
// ratios. Models are processed in model_id order, so the result does not
// depend on the order of the inputs.
ShiftResult shift_pipeline(std::span<const ModelRecord> models_p,
                           std::span<const ModelRecord> models_q, const ShiftOptions& options);

std::string shift_reports_to_json(std::span<const ShiftReport> reports);
std::vector<ShiftReport> shift_reports_from_json(const std::string& text);

}  // namespace filterlens
