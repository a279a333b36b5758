#include "filterlens/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "filterlens/error.hpp"

namespace filterlens {
namespace {

constexpr Rgb kBlue{59, 76, 192};
constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kRed{180, 4, 38};
constexpr Rgb kBackground{128, 128, 128};

std::uint8_t lerp(std::uint8_t a, std::uint8_t b, double t) {
  return static_cast<std::uint8_t>(std::lround(a + (b - a) * t));
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Minimal SVG builder for the charts.
class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double opacity = 1.0) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-opacity=\""
          << num(opacity) << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << num(x) << ',' << num(y) << ' ';
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, double size = 11,
            const char* anchor = "middle") {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
          << "</text>\n";
  }
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\""
        << num(h_) << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

struct Plot {
  double x0, y0, w, h;  // plot area in SVG coordinates
  double lo, hi;        // value range on the y axis
  double y(double v) const { return y0 + h - (v - lo) / (hi - lo) * h; }
};

void draw_axes(Svg& svg, const Plot& p, const std::string& title, const std::string& ylabel) {
  svg.line(p.x0, p.y0 + p.h, p.x0 + p.w, p.y0 + p.h, "black");
  svg.line(p.x0, p.y0, p.x0, p.y0 + p.h, "black");
  for (int t = 0; t <= 4; ++t) {
    const double v = p.lo + (p.hi - p.lo) * t / 4.0;
    svg.line(p.x0 - 4, p.y(v), p.x0, p.y(v), "black");
    svg.text(p.x0 - 6, p.y(v) + 4, num(v), 10, "end");
  }
  svg.text(p.x0 + p.w / 2, p.y0 - 10, title, 13);
  svg.text(p.x0 - 45, p.y0 + p.h / 2, ylabel, 11, "middle");
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

void boxplot_figure(const std::vector<std::vector<double>>& groups, double lo, double hi,
                    const std::string& title, const std::filesystem::path& path) {
  Svg svg(640, 320);
  const Plot p{70, 40, 540, 230, lo, hi};
  draw_axes(svg, p, title, "");
  const double slot = p.w / static_cast<double>(groups.size());
  for (std::size_t d = 0; d < groups.size(); ++d) {
    const double cx = p.x0 + slot * (d + 0.5);
    svg.text(cx, p.y0 + p.h + 16, std::to_string(d), 10);
    if (groups[d].empty()) continue;
    const double q0 = quantile(groups[d], 0.0), q1 = quantile(groups[d], 0.25),
                 q2 = quantile(groups[d], 0.5), q3 = quantile(groups[d], 0.75),
                 q4 = quantile(groups[d], 1.0);
    svg.line(cx, p.y(q0), cx, p.y(q4), "black");
    svg.rect(cx - slot * 0.3, p.y(q3), slot * 0.6, std::max(p.y(q1) - p.y(q3), 0.5),
             "#9ecae1", "black");
    svg.line(cx - slot * 0.3, p.y(q2), cx + slot * 0.3, p.y(q2), "#d62728", 2);
  }
  svg.text(p.x0 + p.w / 2, p.y0 + p.h + 34, "depth decile", 11);
  svg.save(path);
}

}  // namespace

Image::Image(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

void Image::fill_rect(std::size_t x, std::size_t y, std::size_t w, std::size_t h, Rgb c) {
  for (std::size_t yy = y; yy < std::min(y + h, height_); ++yy) {
    for (std::size_t xx = x; xx < std::min(x + w, width_); ++xx) set(xx, yy, c);
  }
}

void write_png(const Image& image, const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(image.width() * 3);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      const Rgb c = image.at(x, y);
      row[3 * x] = c.r;
      row[3 * x + 1] = c.g;
      row[3 * x + 2] = c.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error("cannot read PNG " + path.string());
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error("cannot decode PNG " + path.string());
  }
  Image out(img.width, img.height);
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) {
      const png_byte* px = buf.data() + 3 * (y * out.width() + x);
      out.set(x, y, Rgb{px[0], px[1], px[2]});
    }
  }
  return out;
}

Rgb diverging_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const Rgb end = v < 0 ? kBlue : kRed;
  const double t = std::fabs(v);
  return Rgb{lerp(kWhite.r, end.r, t), lerp(kWhite.g, end.g, t), lerp(kWhite.b, end.b, t)};
}

FilterGridLayout filter_grid_layout(std::size_t n, std::size_t max_filters, std::uint64_t seed) {
  FilterGridLayout layout;
  layout.filter_indices.resize(n);
  std::iota(layout.filter_indices.begin(), layout.filter_indices.end(), std::size_t{0});
  if (n > max_filters) {
    // Partial Fisher-Yates; modulo reduction keeps the draw identical across
    // standard libraries.
    std::mt19937_64 rng(seed);
    auto& idx = layout.filter_indices;
    for (std::size_t i = 0; i < max_filters; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(max_filters);
    std::sort(idx.begin(), idx.end());
  }
  const std::size_t cells = layout.filter_indices.size();
  layout.cols = cells == 0 ? 0 : static_cast<std::size_t>(std::ceil(std::sqrt(cells)));
  layout.rows = cells == 0 ? 0 : (cells + layout.cols - 1) / layout.cols;
  return layout;
}

Image filter_grid_image(const FilterMatrix& fm, const FilterGridLayout& layout) {
  constexpr std::size_t cell = 3 * kGridPixelsPerWeight;
  Image img(layout.cols * (cell + kGridGap) + kGridGap, layout.rows * (cell + kGridGap) + kGridGap,
            kBackground);
  for (std::size_t c = 0; c < layout.filter_indices.size(); ++c) {
    const auto row = fm.row(layout.filter_indices[c]);
    float scale = 0.0f;
    for (float w : row) scale = std::max(scale, std::fabs(w));
    const std::size_t ox = kGridGap + (c % layout.cols) * (cell + kGridGap);
    const std::size_t oy = kGridGap + (c / layout.cols) * (cell + kGridGap);
    for (std::size_t k = 0; k < 9; ++k) {
      const double v = scale > 0.0f ? row[k] / scale : 0.0;
      img.fill_rect(ox + (k % 3) * kGridPixelsPerWeight, oy + (k / 3) * kGridPixelsPerWeight,
                    kGridPixelsPerWeight, kGridPixelsPerWeight, diverging_color(v));
    }
  }
  return img;
}

FilterGridLayout render_filter_grid(const FilterMatrix& fm, std::size_t max_filters,
                                    std::uint64_t seed, const std::filesystem::path& path) {
  if (fm.empty()) throw ShapeError("cannot render an empty filter matrix");
  if (max_filters == 0) throw Error("max_filters must be positive");
  auto layout = filter_grid_layout(fm.rows(), max_filters, seed);
  write_png(filter_grid_image(fm, layout), path);
  return layout;
}

void render_basis(const PcaModel& model, const std::filesystem::path& path) {
  constexpr double cell = 18, pitch = 70;
  Svg svg(9 * pitch + 40, 360);
  for (std::size_t i = 0; i < 9; ++i) {
    const auto v = model.component(i);
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::fabs(x));
    const double ox = 20 + i * pitch + (pitch - 3 * cell) / 2;
    for (std::size_t k = 0; k < 9; ++k) {
      const double t = scale > 0 ? v[k] / scale : 0.0;
      svg.rect(ox + (k % 3) * cell, 30 + (k / 3) * cell, cell, cell, hex(diverging_color(t)));
    }
    svg.text(ox + 1.5 * cell, 22, "v" + std::to_string(i), 11);
  }
  const Plot p{60, 130, 9 * pitch - 40, 180, 0.0, 1.0};
  draw_axes(svg, p, "explained variance ratio (bars) and cumulative (line)", "");
  const double slot = p.w / 9.0;
  std::vector<std::pair<double, double>> cumulative;
  double running = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double r = model.explained_variance_ratio[i];
    running += r;
    const double cx = p.x0 + slot * (i + 0.5);
    svg.rect(cx - slot * 0.35, p.y(r), slot * 0.7, p.y(0.0) - p.y(r), "#4c72b0");
    cumulative.emplace_back(cx, p.y(running));
    svg.circle(cx, p.y(running), 3, "#dd8452");
    svg.text(cx, p.y0 + p.h + 16, std::to_string(i), 10);
  }
  svg.polyline(cumulative, "#dd8452");
  svg.save(path);
}

void render_metric_boxplots(std::span<const LayerMetrics> rows,
                            const std::filesystem::path& out_dir) {
  std::vector<std::vector<double>> sparsity(kDecileCount), entropy(kDecileCount),
      ortho(kDecileCount);
  std::map<std::string, std::size_t> layer_count;
  for (const auto& m : rows) {
    auto& L = layer_count[m.origin.model_id];
    L = std::max(L, m.origin.depth_rank + 1);
  }
  for (const auto& m : rows) {
    const std::size_t d =
        assign_depth(m.origin.depth_rank, layer_count[m.origin.model_id]).decile;
    sparsity[d].push_back(m.sparsity);
    entropy[d].push_back(m.variance_entropy);
    if (m.orthogonality) ortho[d].push_back(*m.orthogonality);
  }
  boxplot_figure(sparsity, 0.0, 1.0, "sparsity by depth decile", out_dir / "sparsity.svg");
  boxplot_figure(entropy, 0.0, std::log10(9.0), "variance entropy by depth decile",
                 out_dir / "variance_entropy.svg");
  boxplot_figure(ortho, 0.0, 1.0, "orthogonality by depth decile",
                 out_dir / "orthogonality.svg");
}

void render_divergence_bars(std::span<const ShiftReport> reports,
                            const std::filesystem::path& path) {
  double top = 0.0;
  for (const auto& r : reports) top = std::max(top, r.kl);
  if (top <= 0.0) top = 1.0;
  const double width = std::max<double>(400, 60.0 * reports.size() + 100);
  Svg svg(width, 320);
  const Plot p{70, 40, width - 100, 220, 0.0, top * 1.05};
  draw_axes(svg, p, "weighted symmetric KL divergence", "");
  const double slot = reports.empty() ? p.w : p.w / static_cast<double>(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const double cx = p.x0 + slot * (i + 0.5);
    const bool missing = !r.flags.empty();
    if (!missing) {
      svg.rect(cx - slot * 0.35, p.y(r.kl), slot * 0.7, p.y(0.0) - p.y(r.kl),
               r.group == kFirstLayerGroup ? "#c44e52" : "#4c72b0");
    }
    std::string label = r.group;
    if (label.rfind("DECILE_", 0) == 0) label = "D" + label.substr(7);
    if (label == kFirstLayerGroup) label = "first";
    svg.text(cx, p.y0 + p.h + 16, missing ? label + "*" : label, 10);
  }
  svg.save(path);
}

void render_coefficient_overlays(const HistogramSet& p, const HistogramSet& q,
                                 const std::filesystem::path& path) {
  constexpr double pw = 200, ph = 120;
  Svg svg(3 * (pw + 40) + 20, 3 * (ph + 50) + 20);
  for (std::size_t axis = 0; axis < 9; ++axis) {
    const auto& ap = p.axes[axis];
    const auto& aq = q.axes[axis];
    double top = 0.0;
    for (double v : ap.probabilities) top = std::max(top, v);
    for (double v : aq.probabilities) top = std::max(top, v);
    const double ox = 30 + (axis % 3) * (pw + 40);
    const double oy = 30 + (axis / 3) * (ph + 50);
    svg.rect(ox, oy, pw, ph, "none", "black");
    svg.text(ox + pw / 2, oy - 6, "basis " + std::to_string(axis), 11);
    const std::size_t bins = ap.probabilities.size();
    for (const auto* h : {&ap, &aq}) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t k = 0; k < bins; ++k) {
        pts.emplace_back(ox + pw * (k + 0.5) / bins,
                         oy + ph - (top > 0 ? h->probabilities[k] / top : 0.0) * ph);
      }
      svg.polyline(pts, h == &ap ? "#4c72b0" : "#dd8452", 0.9);
    }
    svg.text(ox, oy + ph + 14, num(ap.edges.front()), 9, "start");
    svg.text(ox + pw, oy + ph + 14, num(ap.edges.back()), 9, "end");
  }
  svg.save(path);
}

}  // namespace filterlens
