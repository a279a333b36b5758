#include "filterlens/shift.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <map>
#include <tuple>

#include "filterlens/error.hpp"
#include "filterlens/filter_core.hpp"
#include "filterlens/parallel.hpp"

namespace filterlens {
namespace {

constexpr std::size_t K = kFilterSize;
constexpr const char* kMissingFlag = "MISSING";

double symmetric_term(double p, double q) {
  if (p == 0.0 && q == 0.0) return 0.0;
  if (p == 0.0 || q == 0.0) return std::numeric_limits<double>::infinity();
  return p * std::log(p / q) + q * std::log(q / p);
}

// One sparse-dropped, normalized 3x3 layer ready for projection.
struct PreparedLayer {
  const ModelRecord* model;
  DepthAssignment depth;
  FilterMatrix filters;
};

std::vector<const ModelRecord*> sorted_models(std::span<const ModelRecord> models) {
  std::vector<const ModelRecord*> out;
  for (const auto& m : models) out.push_back(&m);
  std::stable_sort(out.begin(), out.end(), [](const ModelRecord* a, const ModelRecord* b) {
    return a->model_id < b->model_id;
  });
  return out;
}

std::vector<PreparedLayer> prepare(std::span<const ModelRecord> models) {
  struct Job {
    const ModelRecord* model;
    ConvLayerRecord layer;
    DepthAssignment depth;
  };
  std::vector<Job> jobs;
  for (const ModelRecord* model : sorted_models(models)) {
    auto layers = select_3x3_layers(*model);
    const auto depth = assign_depth_groups(layers);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      jobs.push_back({model, std::move(layers[i]), depth[i]});
    }
  }
  std::vector<std::optional<PreparedLayer>> prepared(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const FilterMatrix fm = flatten_layer(jobs[i].layer, jobs[i].model->model_id);
    const SparseMask mask = sparse_mask(fm);
    if (mask.sparse_count() == fm.rows()) return;
    prepared[i] = PreparedLayer{jobs[i].model, jobs[i].depth,
                                normalize_filters(drop_sparse(fm, mask))};
  });
  std::vector<PreparedLayer> out;
  for (auto& p : prepared) {
    if (p) out.push_back(std::move(*p));
  }
  return out;
}

void append_rows(CoefficientMatrix& dst, const CoefficientMatrix& src) {
  dst.coeffs.insert(dst.coeffs.end(), src.coeffs.begin(), src.coeffs.end());
}

struct GroupedCoefficients {
  std::vector<std::string> labels;
  std::map<std::string, CoefficientMatrix> by_label;
};

GroupedCoefficients group_coefficients(const std::vector<PreparedLayer>& layers,
                                       const std::vector<CoefficientMatrix>& coeffs,
                                       const ShiftOptions& options) {
  GroupedCoefficients g;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    auto add = [&](const std::string& label) { append_rows(g.by_label[label], coeffs[i]); };
    if (options.grouping == Grouping::kByDataset) {
      add(layer.model->dataset_tag);
      continue;
    }
    if (layer.depth.first_layer) add(kFirstLayerGroup);
    if (!(layer.depth.first_layer && options.exclude_first_from_deciles)) {
      add(decile_group(layer.depth.decile));
    }
  }
  return g;
}

ShiftReport compare_group(const std::string& label, const CoefficientMatrix& p,
                          const CoefficientMatrix& q, const PcaModel& basis,
                          std::size_t bins) {
  ShiftReport report;
  report.group = label;
  report.weights = basis.explained_variance_ratio;
  report.n_p = p.rows();
  report.n_q = q.rows();
  if (p.rows() == 0 || q.rows() == 0) {
    report.flags.emplace_back(kMissingFlag);
    return report;
  }
  const auto [hp, hq] = build_histograms(p, q, bins);
  ShiftReport kl = symmetric_kl(hp, hq, basis.explained_variance_ratio);
  kl.group = label;
  return kl;
}

}  // namespace

std::string decile_group(std::size_t decile) { return "DECILE_" + std::to_string(decile); }

DepthAssignment assign_depth(std::size_t depth_rank, std::size_t layer_count) {
  DepthAssignment a;
  a.first_layer = depth_rank == 0;
  if (layer_count <= 1) return a;
  const std::size_t span = layer_count - 1;
  a.relative_depth = static_cast<double>(depth_rank) / static_cast<double>(span);
  const std::size_t ceil_tenths = (10 * depth_rank + span - 1) / span;
  a.decile = std::min<std::size_t>(ceil_tenths == 0 ? 0 : ceil_tenths - 1, kDecileCount - 1);
  return a;
}

std::vector<DepthAssignment> assign_depth_groups(std::span<const ConvLayerRecord> layers) {
  std::vector<DepthAssignment> out;
  out.reserve(layers.size());
  for (const auto& layer : layers) out.push_back(assign_depth(layer.depth_rank, layers.size()));
  return out;
}

std::vector<DepthGroup> depth_groups(std::span<const ModelRecord> models,
                                     bool exclude_first_from_deciles) {
  std::vector<DepthGroup> groups(1 + kDecileCount);
  groups[0].label = kFirstLayerGroup;
  for (std::size_t d = 0; d < kDecileCount; ++d) groups[1 + d].label = decile_group(d);
  for (const ModelRecord* model : sorted_models(models)) {
    const auto layers = select_3x3_layers(*model);
    const auto depth = assign_depth_groups(layers);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerRef ref{model->model_id, layers[i].layer_name};
      if (depth[i].first_layer) groups[0].members.push_back(ref);
      if (!(depth[i].first_layer && exclude_first_from_deciles)) {
        groups[1 + depth[i].decile].members.push_back(ref);
      }
    }
  }
  return groups;
}

std::pair<HistogramSet, HistogramSet> build_histograms(const CoefficientMatrix& p,
                                                       const CoefficientMatrix& q,
                                                       std::size_t bins) {
  if (p.basis_ref != q.basis_ref) {
    throw BasisMismatchError("populations were projected onto different bases");
  }
  if (p.rows() == 0 || q.rows() == 0) {
    throw EmptyPopulationError("histograms need samples on both sides");
  }
  if (bins < 2) throw BinningError("at least 2 bins are required");

  HistogramSet hp, hq;
  hp.sample_count = p.rows();
  hq.sample_count = q.rows();
  hp.basis_ref = hq.basis_ref = p.basis_ref;
  const double norm = 1.0 + static_cast<double>(bins) * kHistogramSmoothing;

  for (std::size_t axis = 0; axis < K; ++axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* cm : {&p, &q}) {
      for (std::size_t r = 0; r < cm->rows(); ++r) {
        lo = std::min(lo, cm->row(r)[axis]);
        hi = std::max(hi, cm->row(r)[axis]);
      }
    }
    if (hi == lo) {
      const double pad = std::max(kDegenerateRangePad, std::fabs(lo) * kDegenerateRangePad);
      lo -= pad;
      hi += pad;
    }
    std::vector<double> edges(bins + 1);
    for (std::size_t k = 0; k < bins; ++k) {
      edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    }
    edges[bins] = hi;

    auto fill = [&](const CoefficientMatrix& cm, AxisHistogram& h) {
      std::vector<std::size_t> counts(bins, 0);
      for (std::size_t r = 0; r < cm.rows(); ++r) {
        const double x = cm.row(r)[axis];
        const auto it = std::upper_bound(edges.begin() + 1, edges.begin() + bins, x);
        ++counts[static_cast<std::size_t>(it - (edges.begin() + 1))];
      }
      h.edges = edges;
      h.probabilities.resize(bins);
      const double n = static_cast<double>(cm.rows());
      for (std::size_t k = 0; k < bins; ++k) {
        h.probabilities[k] =
            (static_cast<double>(counts[k]) / n + kHistogramSmoothing) / norm;
      }
    };
    fill(p, hp.axes[axis]);
    fill(q, hq.axes[axis]);
  }
  return {std::move(hp), std::move(hq)};
}

ShiftReport symmetric_kl(const HistogramSet& p, const HistogramSet& q,
                         std::span<const double, 9> weights) {
  ShiftReport report;
  report.n_p = p.sample_count;
  report.n_q = q.sample_count;
  for (std::size_t axis = 0; axis < K; ++axis) {
    const auto& ap = p.axes[axis];
    const auto& aq = q.axes[axis];
    if (ap.edges != aq.edges || ap.probabilities.size() != aq.probabilities.size()) {
      throw BinningError("bin edges differ on axis " + std::to_string(axis));
    }
    if (!(weights[axis] >= 0.0)) {
      throw DataError("KL weights must be non-negative");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < ap.probabilities.size(); ++k) {
      sum += symmetric_term(ap.probabilities[k], aq.probabilities[k]);
    }
    report.per_axis[axis] = sum;
    report.weights[axis] = weights[axis];
  }
  for (std::size_t axis = 0; axis < K; ++axis) {
    report.kl += report.weights[axis] * report.per_axis[axis];
  }
  return report;
}

ShiftResult shift_pipeline(std::span<const ModelRecord> models_p,
                           std::span<const ModelRecord> models_q, const ShiftOptions& options) {
  if (models_p.empty() || models_q.empty()) {
    throw EmptyPopulationError("shift analysis needs models on both sides");
  }
  if (options.bins < 2) throw BinningError("at least 2 bins are required");

  const auto layers_p = prepare(models_p);
  const auto layers_q = prepare(models_q);

  ShiftResult result;
  if (options.basis) {
    result.basis = *options.basis;
  } else {
    std::vector<FilterMatrix> all;
    all.reserve(layers_p.size() + layers_q.size());
    for (const auto* side : {&layers_p, &layers_q}) {
      for (const auto& l : *side) all.push_back(l.filters);
    }
    result.basis = fit_shared_basis(all);
  }

  auto project_all = [&](const std::vector<PreparedLayer>& layers) {
    std::vector<CoefficientMatrix> out(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out[i] = project(result.basis, layers[i].filters);
    }
    return out;
  };
  const auto coeffs_p = project_all(layers_p);
  const auto coeffs_q = project_all(layers_q);
  auto groups_p = group_coefficients(layers_p, coeffs_p, options);
  auto groups_q = group_coefficients(layers_q, coeffs_q, options);

  std::vector<std::string> labels;
  if (options.grouping == Grouping::kByDepth) {
    labels.emplace_back(kFirstLayerGroup);
    for (std::size_t d = 0; d < kDecileCount; ++d) labels.push_back(decile_group(d));
  } else {
    for (const auto* g : {&groups_p, &groups_q}) {
      for (const auto& [label, _] : g->by_label) labels.push_back(label);
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  }

  const std::string basis_ref = result.basis.basis_id();
  CoefficientMatrix all_p, all_q;
  for (const auto& c : coeffs_p) append_rows(all_p, c);
  for (const auto& c : coeffs_q) append_rows(all_q, c);
  all_p.basis_ref = all_q.basis_ref = basis_ref;
  if (all_p.rows() > 0 && all_q.rows() > 0) {
    std::tie(result.overall_p, result.overall_q) = build_histograms(all_p, all_q, options.bins);
  }

  for (const auto& label : labels) {
    auto& p = groups_p.by_label[label];
    auto& q = groups_q.by_label[label];
    p.basis_ref = q.basis_ref = basis_ref;
    result.reports.push_back(compare_group(label, p, q, result.basis, options.bins));
  }
  return result;
}

std::string shift_reports_to_json(std::span<const ShiftReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["group"] = r.group;
    j["kl"] = r.kl;
    j["per_axis"] = r.per_axis;
    j["weights"] = r.weights;
    j["n_P"] = r.n_p;
    j["n_Q"] = r.n_q;
    j["flags"] = r.flags;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<ShiftReport> shift_reports_from_json(const std::string& text) {
  try {
    const auto arr = nlohmann::json::parse(text);
    std::vector<ShiftReport> out;
    for (const auto& j : arr) {
      ShiftReport r;
      r.group = j.at("group").get<std::string>();
      r.kl = j.at("kl").get<double>();
      r.per_axis = j.at("per_axis").get<std::array<double, 9>>();
      r.weights = j.at("weights").get<std::array<double, 9>>();
      r.n_p = j.at("n_P").get<std::size_t>();
      r.n_q = j.at("n_Q").get<std::size_t>();
      r.flags = j.at("flags").get<std::vector<std::string>>();
      out.push_back(std::move(r));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("shift JSON: ") + e.what());
  }
}

}  // namespace filterlens
