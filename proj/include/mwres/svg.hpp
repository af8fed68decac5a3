#pragma once

// Minimal SVG line and scatter plots for the experiment figures.

#include <string>
#include <vector>

namespace mwres {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> yerr;  // optional symmetric error bars
  bool markers = true;
  bool line = false;
  bool step = false;  // draw as a right-continuous staircase
  std::string color = "#1f77b4";
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<PlotSeries> series;
};

std::string render_svg(const Plot& plot);
void write_svg(const std::string& path, const Plot& plot);

}  // namespace mwres
