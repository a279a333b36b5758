#pragma once

// Static figures: PNG filter grids and SVG charts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "filterlens/filter_core.hpp"
#include "filterlens/metrics.hpp"
#include "filterlens/pca.hpp"
#include "filterlens/shift.hpp"

namespace filterlens {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

class Image {
 public:
  Image(std::size_t width, std::size_t height, Rgb fill = {});
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  Rgb at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  void set(std::size_t x, std::size_t y, Rgb c) { pixels_[y * width_ + x] = c; }
  void fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c);
  std::span<const Rgb> pixels() const { return pixels_; }

 private:
  std::size_t width_, height_;
  std::vector<Rgb> pixels_;
};

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// Blue-white-red map over [-1, 1]; 0 is white. Values outside are clamped.
Rgb diverging_color(double v);

struct FilterGridLayout {
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::vector<std::size_t> filter_indices;  // row-major cell order
};

inline constexpr std::size_t kGridPixelsPerWeight = 8;
inline constexpr std::size_t kGridGap = 2;

// Picks the filters to show: all of them when n <= max_filters, otherwise
// max_filters distinct indices drawn with the seeded generator, ascending.
FilterGridLayout filter_grid_layout(std::size_t n, std::size_t max_filters, std::uint64_t seed);

// Each cell is one filter scaled by its own max |w| onto the diverging map.
Image filter_grid_image(const FilterMatrix& fm, const FilterGridLayout& layout);

FilterGridLayout render_filter_grid(const FilterMatrix& fm, std::size_t max_filters,
                                    std::uint64_t seed, const std::filesystem::path& path);

// The nine basis vectors as 3x3 heatmaps (sigma-descending) above a panel
// with the explained-variance ratios and their cumulative sum.
void render_basis(const PcaModel& model, const std::filesystem::path& path);

// One box-plot figure per metric, layers grouped by depth decile.
void render_metric_boxplots(std::span<const LayerMetrics> rows,
                            const std::filesystem::path& out_dir);

// Bar chart of weighted KL per group.
void render_divergence_bars(std::span<const ShiftReport> reports,
                            const std::filesystem::path& path);

// Per-axis histogram overlays of two populations on shared bins.
void render_coefficient_overlays(const HistogramSet& p, const HistogramSet& q,
                                 const std::filesystem::path& path);

}  // namespace filterlens
