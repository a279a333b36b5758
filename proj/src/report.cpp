#include "filterlens/report.hpp"

#include <glob.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "filterlens/error.hpp"
#include "filterlens/metrics.hpp"
#include "filterlens/parallel.hpp"
#include "filterlens/render.hpp"

namespace filterlens {
namespace {

bool has_glob_chars(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

bool prepare_out_dir(const std::filesystem::path& dir, std::ostream& log) {
  if (dir.empty()) {
    log << "error: --out is required\n";
    return false;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    log << "error: cannot create output directory " << dir.string() << "\n";
    return false;
  }
  return true;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::filesystem::path> expand_globs(std::span<const std::string> patterns) {
  std::vector<std::filesystem::path> out;
  for (const auto& pattern : patterns) {
    if (!has_glob_chars(pattern)) {
      out.emplace_back(pattern);
      continue;
    }
    glob_t g{};
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LoadResult load_models(std::span<const std::filesystem::path> paths, std::ostream& log) {
  std::vector<std::optional<ModelRecord>> slots(paths.size());
  std::vector<std::string> errors(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) {
    try {
      slots[i] = read_container(paths[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  LoadResult result;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (slots[i]) {
      result.models.push_back(std::move(*slots[i]));
    } else {
      log << "error: " << errors[i] << "\n";
      ++result.failures;
    }
  }
  return result;
}

int cmd_metrics(const AnalysisConfig& config, std::ostream& log) {
  const auto paths = expand_globs(config.inputs_p);
  if (paths.empty()) {
    log << "no inputs\n";
    return kExitUsage;
  }
  if (!prepare_out_dir(config.out_dir, log)) return kExitUsage;

  const LoadResult loaded = load_models(paths, log);
  std::size_t skipped = loaded.failures;
  std::vector<LayerMetrics> rows;
  for (const auto& model : loaded.models) {
    try {
      auto m = model_metrics(model);
      rows.insert(rows.end(), m.begin(), m.end());
    } catch (const EmptySelectionError& e) {
      log << "skipped: " << e.what() << "\n";
      ++skipped;
    }
  }

  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  write_text(config.out_dir / "metrics.csv", csv.str());
  if (config.emit_plots) render_metric_boxplots(rows, config.out_dir);

  log << "metrics: " << rows.size() << " layers from " << (paths.size() - skipped)
      << " model(s)\n";
  return skipped == 0 ? kExitOk : kExitPartial;
}

int cmd_shift(const AnalysisConfig& config, std::ostream& log) {
  if (config.inputs_p.empty() || config.inputs_q.empty()) {
    log << "error: both --pop-a and --pop-b are required\n";
    return kExitUsage;
  }
  if (config.bins < 2) {
    log << "error: --bins must be at least 2\n";
    return kExitUsage;
  }
  const auto paths_p = expand_globs(config.inputs_p);
  const auto paths_q = expand_globs(config.inputs_q);
  if (paths_p.empty() || paths_q.empty()) {
    log << "no inputs\n";
    return kExitUsage;
  }
  if (!prepare_out_dir(config.out_dir, log)) return kExitUsage;

  const LoadResult p = load_models(paths_p, log);
  const LoadResult q = load_models(paths_q, log);
  if (p.models.empty() || q.models.empty()) {
    log << "error: no readable models in one of the populations\n";
    return kExitPartial;
  }

  ShiftOptions options;
  options.grouping = config.grouping;
  options.bins = config.bins;
  options.exclude_first_from_deciles = config.exclude_first_from_deciles;
  if (config.cache_basis && std::filesystem::exists(*config.cache_basis)) {
    options.basis = load_pca_model(*config.cache_basis);
    log << "using cached basis " << config.cache_basis->string() << "\n";
  }

  ShiftResult result;
  try {
    result = shift_pipeline(p.models, q.models, options);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  if (config.cache_basis && !options.basis) save_pca_model(result.basis, *config.cache_basis);

  write_text(config.out_dir / "shift.json", shift_reports_to_json(result.reports));
  write_text(config.out_dir / "basis.json", pca_to_json(result.basis));
  if (config.emit_plots) {
    render_divergence_bars(result.reports, config.out_dir / "divergence.svg");
    render_basis(result.basis, config.out_dir / "basis.svg");
    if (result.overall_p.sample_count > 0) {
      render_coefficient_overlays(result.overall_p, result.overall_q,
                                  config.out_dir / "coefficients.svg");
    }
  }
  for (const auto& r : result.reports) {
    log << r.group << ": kl=" << r.kl << " (n_P=" << r.n_p << ", n_Q=" << r.n_q << ")"
        << (r.flags.empty() ? "" : " MISSING") << "\n";
  }
  return p.failures + q.failures == 0 ? kExitOk : kExitPartial;
}

int cmd_render(const std::filesystem::path& input, const std::string& layer_name,
               const std::filesystem::path& out_png, std::size_t max_filters,
               std::uint64_t seed, std::ostream& log) {
  if (max_filters == 0) {
    log << "error: --max-filters must be positive\n";
    return kExitUsage;
  }
  try {
    const ModelRecord model = read_container(input);
    const auto it = std::find_if(model.layers.begin(), model.layers.end(),
                                 [&](const ConvLayerRecord& l) { return l.layer_name == layer_name; });
    if (it == model.layers.end()) {
      log << "error: layer \"" << layer_name << "\" not found in " << input.string() << "\n";
      return kExitUsage;
    }
    const auto layout =
        render_filter_grid(flatten_layer(*it, model.model_id), max_filters, seed, out_png);
    log << "rendered " << layout.filter_indices.size() << " filters to " << out_png.string()
        << "\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitPartial;
  }
}

int cmd_inspect(std::span<const std::string> inputs, std::ostream& out, std::ostream& log) {
  const auto paths = expand_globs(inputs);
  if (paths.empty()) {
    log << "no inputs\n";
    return kExitUsage;
  }
  const LoadResult loaded = load_models(paths, log);
  const CollectionReport report = validate_collection(loaded.models);
  for (const auto& m : report.models) {
    out << m.model_id << ": " << m.layer_count << " layers, " << m.layer_3x3_count
        << " 3x3 layers, " << m.filter_3x3_count << " 3x3 filters";
    for (const auto& note : m.notes) out << " [" << note << "]";
    out << "\n";
  }
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return loaded.failures == 0 ? kExitOk : kExitPartial;
}

}  // namespace filterlens
