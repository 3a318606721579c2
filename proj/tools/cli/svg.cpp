#include "cli/svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "infoalign/errors.hpp"

namespace infoalign::cli {
namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr int kTicks = 5;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string px(double v) { return fmt("%.2f", v); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double cell(const std::string& text, const std::string& column, bool log_axis) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw IoError("column '" + column + "': '" + text + "' is not a finite number");
  }
  if (log_axis) {
    if (v <= 0.0) throw IoError("column '" + column + "': nonpositive value on a log axis");
    return std::log10(v);
  }
  return v;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    } else if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(0.5, std::abs(hi) * 0.05);
      lo -= pad;
      hi += pad;
    }
  }
};

std::string tick_label(double v, bool log_axis) {
  return log_axis ? fmt("%.2g", std::pow(10.0, v)) : fmt("%.3g", v);
}

}  // namespace

std::string render_svg(const io::CsvTable& table, const ChartSpec& spec) {
  const std::size_t xi = table.column(spec.x_column);
  std::vector<std::size_t> yi;
  for (const std::string& c : spec.y_columns) yi.push_back(table.column(c));

  const std::size_t n = table.rows.size();
  std::vector<double> xs(n);
  std::vector<std::vector<double>> ys(yi.size(), std::vector<double>(n));
  Range xr;
  Range yr;
  for (std::size_t r = 0; r < n; ++r) {
    xs[r] = cell(table.rows[r][xi], spec.x_column, spec.log_x);
    xr.add(xs[r]);
    for (std::size_t s = 0; s < yi.size(); ++s) {
      ys[s][r] = cell(table.rows[r][yi[s]], spec.y_columns[s], spec.log_y);
      yr.add(ys[s][r]);
    }
  }
  xr.settle();
  yr.settle();

  const double w = spec.width;
  const double h = spec.height;
  const double plot_w = w - kLeft - kRight;
  const double plot_h = h - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto sy = [&](double v) { return kTop + plot_h - (v - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) +
         "\" viewBox=\"0 0 " + std::to_string(spec.width) + " " + std::to_string(spec.height) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + px(w) + "\" height=\"" + px(h) + "\" fill=\"white\"/>\n";
  out += "<text x=\"" + px(kLeft + plot_w / 2) + "\" y=\"" + px(kTop / 2 + 4) +
         "\" text-anchor=\"middle\" font-size=\"14\">" + escape(spec.title) + "</text>\n";

  out += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(kTop + plot_h) + "\" x2=\"" +
         px(kLeft + plot_w) + "\" y2=\"" + px(kTop + plot_h) + "\"/>\n";
  out += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(kTop) + "\" x2=\"" + px(kLeft) + "\" y2=\"" +
         px(kTop + plot_h) + "\"/>\n";
  out += "</g>\n<g class=\"ticks\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    out += "<line x1=\"" + px(sx(fx)) + "\" y1=\"" + px(kTop + plot_h) + "\" x2=\"" + px(sx(fx)) +
           "\" y2=\"" + px(kTop + plot_h + 4) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + px(sx(fx)) + "\" y=\"" + px(kTop + plot_h + 16) +
           "\" text-anchor=\"middle\">" + tick_label(fx, spec.log_x) + "</text>\n";
    out += "<line x1=\"" + px(kLeft - 4) + "\" y1=\"" + px(sy(fy)) + "\" x2=\"" + px(kLeft) +
           "\" y2=\"" + px(sy(fy)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + px(kLeft - 6) + "\" y=\"" + px(sy(fy) + 4) +
           "\" text-anchor=\"end\">" + tick_label(fy, spec.log_y) + "</text>\n";
  }
  out += "</g>\n";
  const std::string x_label = spec.x_label.empty() ? spec.x_column : spec.x_label;
  out += "<text x=\"" + px(kLeft + plot_w / 2) + "\" y=\"" + px(h - 12) +
         "\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
  if (!spec.y_label.empty()) {
    out += "<text x=\"14\" y=\"" + px(kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           px(kTop + plot_h / 2) + ")\">" + escape(spec.y_label) + "</text>\n";
  }

  if (n == 0) {
    out += "<text class=\"empty\" x=\"" + px(kLeft + plot_w / 2) + "\" y=\"" +
           px(kTop + plot_h / 2) + "\" text-anchor=\"middle\" fill=\"#888888\">empty</text>\n";
  } else {
    for (std::size_t s = 0; s < yi.size(); ++s) {
      out += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[s % kPalette.size()]) +
             "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t r = 0; r < n; ++r) {
        out += (r ? " " : "") + px(sx(xs[r])) + "," + px(sy(ys[s][r]));
      }
      out += "\"/>\n";
    }
  }

  out += "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < yi.size(); ++s) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    const double lx = kLeft + plot_w + 12;
    out += "<line x1=\"" + px(lx) + "\" y1=\"" + px(ly) + "\" x2=\"" + px(lx + 20) + "\" y2=\"" +
           px(ly) + "\" stroke=\"" + kPalette[s % kPalette.size()] + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + px(lx + 26) + "\" y=\"" + px(ly + 4) + "\">" +
           escape(spec.y_columns[s]) + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace infoalign::cli
