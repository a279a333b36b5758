#pragma once

// Command implementations behind the filterlens CLI. Each returns the
// process exit code: 0 success, 1 partial failure (some inputs skipped or
// unreadable), 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filterlens/shift.hpp"
#include "filterlens/weights_io.hpp"

namespace filterlens {

enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitUsage = 2 };

struct AnalysisConfig {
  std::vector<std::string> inputs_p;  // globs; --inputs for metrics, --pop-a for shift
  std::vector<std::string> inputs_q;  // --pop-b
  std::filesystem::path out_dir;
  std::size_t bins = kDefaultBins;
  Grouping grouping = Grouping::kByDepth;
  bool exclude_first_from_deciles = false;
  bool emit_plots = false;
  std::optional<std::filesystem::path> cache_basis;
  std::uint64_t seed = 0;
};

// Sorted, de-duplicated matches of every pattern. A pattern without glob
// metacharacters names a file directly and is kept even if missing, so the
// read error is reported rather than silently dropped.
std::vector<std::filesystem::path> expand_globs(std::span<const std::string> patterns);

struct LoadResult {
  std::vector<ModelRecord> models;  // in path order
  std::size_t failures = 0;
};

// Reads containers in parallel; failures are logged per file.
LoadResult load_models(std::span<const std::filesystem::path> paths, std::ostream& log);

// Writes <out>/metrics.csv (and box plots with emit_plots).
int cmd_metrics(const AnalysisConfig& config, std::ostream& log);

// Writes <out>/shift.json and <out>/basis.json (and figures with emit_plots).
int cmd_shift(const AnalysisConfig& config, std::ostream& log);

// PNG grid of one layer's 3x3 filters.
int cmd_render(const std::filesystem::path& input, const std::string& layer_name,
               const std::filesystem::path& out_png, std::size_t max_filters,
               std::uint64_t seed, std::ostream& log);

// Prints collection diagnostics (layer and 3x3 filter counts, duplicate ids).
int cmd_inspect(std::span<const std::string> inputs, std::ostream& out, std::ostream& log);

}  // namespace filterlens
