#include "filterlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "filterlens/error.hpp"
#include "filterlens/kernels/kernels.hpp"
#include "filterlens/parallel.hpp"
#include "filterlens/pca.hpp"

namespace filterlens {
namespace {

constexpr std::pair<MetricFlag, const char*> kFlagNames[] = {
    {MetricFlag::kAllSparse, "ALL_SPARSE"},
    {MetricFlag::kZeroVariance, "ZERO_VARIANCE"},
    {MetricFlag::kSingleFilterbank, "SINGLE_FILTERBANK"},
};

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

std::string MetricFlags::to_string() const {
  std::string out;
  for (const auto& [flag, name] : kFlagNames) {
    if (!has(flag)) continue;
    if (!out.empty()) out += '|';
    out += name;
  }
  return out;
}

MetricFlags MetricFlags::parse(const std::string& text) {
  MetricFlags flags;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = std::min(text.find('|', start), text.size());
    const std::string token = text.substr(start, end - start);
    bool known = false;
    for (const auto& [flag, name] : kFlagNames) {
      if (token == name) {
        flags.set(flag);
        known = true;
      }
    }
    if (!known) throw FormatError("unknown metric flag \"" + token + "\"");
    start = end + 1;
  }
  return flags;
}

double ratio_entropy(std::span<const double, 9> ratios) {
  double h = 0.0;
  for (double r : ratios) {
    if (r > 0.0) h -= r * std::log10(r);
  }
  return std::max(h, 0.0);
}

EntropyResult variance_entropy(const FilterMatrix& fm) {
  EntropyResult out;
  if (fm.empty()) {
    out.flags.set(MetricFlag::kAllSparse);
    return out;
  }
  const SparseMask mask = sparse_mask(fm);
  if (mask.threshold == 0.0) out.flags.set(MetricFlag::kZeroVariance);
  if (fm.rows() - mask.sparse_count() < 2) {
    out.flags.set(MetricFlag::kAllSparse);
    return out;
  }
  const PcaModel model = fit_pca(drop_sparse(fm, mask));
  if (model.degenerate) {
    out.flags.set(MetricFlag::kZeroVariance);
    return out;
  }
  out.value = ratio_entropy(model.explained_variance_ratio);
  return out;
}

std::optional<double> orthogonality(const ConvLayerRecord& layer) {
  if (layer.weights.size() != layer.element_count()) {
    throw ShapeError(layer.layer_name + ": weight count does not match shape");
  }
  const auto& k = kernels::active();
  const std::size_t bank_len = layer.c_in * layer.k1 * layer.k2;
  auto bank = [&](std::size_t o) { return layer.weights.data() + o * bank_len; };

  std::vector<std::size_t> live;
  std::vector<double> sq_norm;
  for (std::size_t o = 0; o < layer.c_out; ++o) {
    const double s = k.dot(bank(o), bank(o), bank_len);
    if (s > 0.0) {
      live.push_back(o);
      sq_norm.push_back(s);
    }
  }
  const std::size_t c = live.size();
  if (c < 2) return std::nullopt;

  // |cos| between banks; the diagonal of W W^T - I is zero by construction.
  // sqrt(s_i * s_j) reproduces s_i exactly for identical banks, so parallel
  // pairs give |cos| = 1 without rounding residue.
  std::vector<double> row_sum(c, 0.0);
  parallel_for(c, [&](std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = i + 1; j < c; ++j) {
      const double d = k.dot(bank(live[i]), bank(live[j]), bank_len);
      acc += std::fabs(d) / std::sqrt(sq_norm[i] * sq_norm[j]);
    }
    row_sum[i] = acc;
  });
  double off = 0.0;
  for (double s : row_sum) off += s;
  const double value = 1.0 - 2.0 * off / (static_cast<double>(c) * static_cast<double>(c - 1));
  return std::clamp(value, 0.0, 1.0);
}

bool LayerMetrics::operator==(const LayerMetrics& o) const {
  return origin.model_id == o.origin.model_id && origin.layer_name == o.origin.layer_name &&
         origin.depth_rank == o.origin.depth_rank && relative_depth == o.relative_depth &&
         n_filters == o.n_filters && sparsity == o.sparsity &&
         variance_entropy == o.variance_entropy && orthogonality == o.orthogonality &&
         flags == o.flags;
}

LayerMetrics layer_metrics(const ConvLayerRecord& layer, double relative_depth,
                           const std::string& model_id) {
  const FilterMatrix fm = flatten_layer(layer, model_id);
  LayerMetrics m;
  m.origin = fm.origin();
  m.relative_depth = relative_depth;
  m.n_filters = fm.rows();
  m.sparsity = sparsity_ratio(fm);
  const EntropyResult entropy = variance_entropy(fm);
  m.variance_entropy = entropy.value;
  m.flags |= entropy.flags;
  m.orthogonality = orthogonality(layer);
  if (!m.orthogonality) m.flags.set(MetricFlag::kSingleFilterbank);
  return m;
}

std::vector<LayerMetrics> model_metrics(const ModelRecord& model) {
  const auto layers = select_3x3_layers(model);
  const std::size_t L = layers.size();
  std::vector<LayerMetrics> out(L);
  // Layers are handed out one at a time; orthogonality parallelizes inside.
  for (std::size_t i = 0; i < L; ++i) {
    const double r = L > 1 ? static_cast<double>(i) / static_cast<double>(L - 1) : 0.0;
    out[i] = layer_metrics(layers[i], r, model.model_id);
  }
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const LayerMetrics> rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& m : rows) {
    out << csv_field(m.origin.model_id) << ',' << csv_field(m.origin.layer_name) << ','
        << m.origin.depth_rank << ',' << format_real(m.relative_depth) << ',' << m.n_filters
        << ',' << format_real(m.sparsity) << ',' << format_real(m.variance_entropy) << ','
        << (m.orthogonality ? format_real(*m.orthogonality) : std::string()) << ','
        << m.flags.to_string() << '\n';
  }
}

std::vector<LayerMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw FormatError("metrics CSV: unexpected header");
  }
  std::vector<LayerMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw FormatError("metrics CSV: expected 9 fields in: " + line);
    try {
      LayerMetrics m;
      m.origin = {f[0], f[1], std::stoul(f[2])};
      m.relative_depth = std::stod(f[3]);
      m.n_filters = std::stoul(f[4]);
      m.sparsity = std::stod(f[5]);
      m.variance_entropy = std::stod(f[6]);
      if (!f[7].empty()) m.orthogonality = std::stod(f[7]);
      m.flags = MetricFlags::parse(f[8]);
      rows.push_back(std::move(m));
    } catch (const std::logic_error&) {
      throw FormatError("metrics CSV: malformed number in: " + line);
    }
  }
  return rows;
}

}  // namespace filterlens
