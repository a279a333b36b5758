#include <CLI11.hpp>
#include <iostream>

#include "filterlens/report.hpp"

int main(int argc, char** argv) {
  using namespace filterlens;

  CLI::App app{"filterlens: 3x3 convolution filter analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "filterlens 0.1.0");

  AnalysisConfig metrics_cfg;
  auto* metrics = app.add_subcommand("metrics", "Per-layer sparsity, variance entropy, orthogonality");
  metrics->add_option("--inputs", metrics_cfg.inputs_p, "NFW file glob(s)")->required();
  metrics->add_option("--out", metrics_cfg.out_dir, "Output directory")->required();
  metrics->add_flag("--plots", metrics_cfg.emit_plots, "Emit depth-decile box plots");

  AnalysisConfig shift_cfg;
  std::string grouping = "depth";
  std::string cache_basis;
  auto* shift = app.add_subcommand("shift", "Weighted symmetric KL shift between two populations");
  shift->add_option("--pop-a", shift_cfg.inputs_p, "NFW glob(s) for population P");
  shift->add_option("--pop-b", shift_cfg.inputs_q, "NFW glob(s) for population Q");
  shift->add_option("--out", shift_cfg.out_dir, "Output directory")->required();
  shift->add_option("--bins", shift_cfg.bins, "Histogram bins per axis")
      ->default_val(kDefaultBins);
  shift->add_option("--grouping", grouping, "depth or dataset")
      ->check(CLI::IsMember({"depth", "dataset"}))
      ->default_val("depth");
  shift->add_flag("--exclude-first-from-deciles", shift_cfg.exclude_first_from_deciles,
                  "Report the first layer only in FIRST_LAYER");
  shift->add_flag("--plots", shift_cfg.emit_plots, "Emit figures");
  shift->add_option("--cache-basis", cache_basis,
                    "Shared basis JSON; loaded when present, written otherwise");

  std::string render_input, render_layer, render_out;
  std::size_t max_filters = 256;
  std::uint64_t seed = 0;
  auto* render = app.add_subcommand("render", "PNG grid of one layer's 3x3 filters");
  render->add_option("--input", render_input, "NFW file")->required();
  render->add_option("--layer", render_layer, "Layer name")->required();
  render->add_option("--out", render_out, "Output PNG")->required();
  render->add_option("--max-filters", max_filters, "Subsample above this count")
      ->default_val(256);
  render->add_option("--seed", seed, "Subsampling seed")->default_val(0);

  std::vector<std::string> inspect_inputs;
  auto* inspect = app.add_subcommand("inspect", "Collection diagnostics");
  inspect->add_option("--inputs", inspect_inputs, "NFW file glob(s)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*metrics) return cmd_metrics(metrics_cfg, std::cerr);
    if (*shift) {
      shift_cfg.grouping = grouping == "dataset" ? Grouping::kByDataset : Grouping::kByDepth;
      if (!cache_basis.empty()) shift_cfg.cache_basis = cache_basis;
      return cmd_shift(shift_cfg, std::cerr);
    }
    if (*render) return cmd_render(render_input, render_layer, render_out, max_filters, seed, std::cerr);
    if (*inspect) return cmd_inspect(inspect_inputs, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
