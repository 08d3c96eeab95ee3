#pragma once

// Minimal SVG line charts built from polylines.

#include <filesystem>
#include <string>
#include <vector>

#include "dsae/matrix.hpp"

namespace dsae::svg {

struct Series {
  std::string label;
  Vector x;
  Vector y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

std::string line_plot(const std::vector<Series>& series, const PlotOptions& opts);
void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, const PlotOptions& opts);

}  // namespace dsae::svg
