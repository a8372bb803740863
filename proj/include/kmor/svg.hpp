#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace kmor {

struct SvgSeries {
  std::string label;
  std::string color = "#1f77b4";
  double width = 1.2;
  bool markers = false;  // draw circles at the points
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

struct SvgPlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width_px = 900;
  int height_px = 420;
};

// Writes a static line/scatter plot. With log_y, non-positive values
// are dropped from the plot.
void write_svg_plot(const std::string& path,
                    const std::vector<SvgSeries>& series,
                    const SvgPlotOptions& opts);

}  // namespace kmor
