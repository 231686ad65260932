#include "dmsb/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dmsb::chart {

namespace {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void render_line_chart(const std::string& csv_path, const ChartSpec& spec,
                       const std::string& out_svg_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open CSV: " + csv_path);

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw std::runtime_error("CSV has no header row: " + csv_path);

  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = column(spec.x_column);
  const std::size_t yi = column(spec.y_column);
  const bool grouped = !spec.series_column.empty();
  const std::size_t si = grouped ? column(spec.series_column) : 0;

  std::vector<Series> series;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() <= std::max({xi, yi, grouped ? si : std::size_t{0}})) {
      throw std::runtime_error("short CSV row: " + line);
    }
    const std::string label = grouped ? fields[si] : "series";
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}, {}});
      it = series.end() - 1;
    }
    it->x.push_back(std::stod(fields[xi]));
    it->y.push_back(std::stod(fields[yi]));
  }
  if (series.empty()) throw std::runtime_error("CSV has no data rows: " + csv_path);

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : series) {
    for (const double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (const double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  constexpr double kWidth = 860.0;
  constexpr double kHeight = 520.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 30.0;
  constexpr double kTop = 50.0;
  constexpr double kBottom = 60.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  const auto py = [&](double y) { return kTop + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty()) {
    svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"18\">" << escape_xml(spec.title)
        << "</text>\n";
  }

  // Axes and ticks.
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\""
      << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(kTop + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double tx = xmin + (xmax - xmin) * i / kTicks;
    const double ty = ymin + (ymax - ymin) * i / kTicks;
    svg << "<line x1=\"" << fmt(px(tx)) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\""
        << fmt(px(tx)) << "\" y2=\"" << fmt(kTop + plot_h + 5)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(px(tx)) << "\" y=\"" << fmt(kTop + plot_h + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(tx)
        << "</text>\n";
    svg << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py(ty)) << "\" x2=\""
        << fmt(kLeft) << "\" y2=\"" << fmt(py(ty))
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(ty) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(ty)
        << "</text>\n";
  }
  const std::string x_label = spec.x_label.empty() ? spec.x_column : spec.x_label;
  const std::string y_label = spec.y_label.empty() ? spec.y_column : spec.y_label;
  svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << escape_xml(x_label) << "</text>\n";
  svg << "<text x=\"20\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 20 " << fmt(kTop + plot_h / 2) << ")\">" << escape_xml(y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) svg << " ";
      svg << fmt(px(s.x[i])) << "," << fmt(py(s.y[i]));
    }
    svg << "\"/>\n";
    // Legend entry.
    const double ly = kTop + 8 + 16 * static_cast<double>(k);
    svg << "<line x1=\"" << fmt(kLeft + plot_w - 150) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(kLeft + plot_w - 130) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + plot_w - 124) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(out_svg_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + out_svg_path);
  out << svg.str();
  if (!out) throw std::runtime_error("failed to write chart: " + out_svg_path);
}

}  // namespace dmsb::chart
