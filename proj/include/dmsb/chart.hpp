#pragma once

#include <string>

namespace dmsb::chart {

struct ChartSpec {
  std::string x_column;
  std::string y_column;
  std::string series_column;  // empty: treat all rows as one series
  std::string title;
  std::string x_label;  // defaults to the column name
  std::string y_label;
};

/// Renders a line chart from a results CSV into an SVG file. One polyline
/// per distinct series value, drawn in row order. Output is a pure
/// function of the CSV bytes and the spec: identical inputs give identical
/// files. A CSV without data rows is an error and no file is written.
void render_line_chart(const std::string& csv_path, const ChartSpec& spec,
                       const std::string& out_svg_path);

}  // namespace dmsb::chart
