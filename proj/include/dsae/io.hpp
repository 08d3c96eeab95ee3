#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsae/dynsys.hpp"
#include "dsae/matrix.hpp"

namespace dsae::io {

// 17 significant digits; parses back to the identical double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values);
CsvTable read_csv(const std::filesystem::path& path);

// Header `t,x1,...,xm`.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

// Header `t,y`.
void write_series(const std::filesystem::path& path, const MeasurementSeries& series);
// Reads column `column` (default: the second) against the first column as time.
MeasurementSeries read_series(const std::filesystem::path& path, std::size_t column = 1);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dsae::io
