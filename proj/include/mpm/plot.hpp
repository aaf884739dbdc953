#pragma once

#include <string>
#include <vector>

namespace mpm {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN points are skipped
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  // When set, x values are indices into these labels.
  std::vector<std::string> x_categories;
  int width = 640;
  int height = 400;
};

/// Standalone SVG line chart with markers and a legend.
std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace mpm
