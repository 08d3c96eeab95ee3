#include "dsae/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dsae::io {

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    std::size_t b = 0;
    while (b < cur.size() && cur[b] == ' ') ++b;
    out.push_back(cur.substr(b));
  }
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError(path.string() + ":" + std::to_string(line) + ": cannot parse number '" + s + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values) {
  if (!header.empty() && header.size() != values.cols())
    throw InvalidArgument("write_csv: header has " + std::to_string(header.size()) +
                          " names for " + std::to_string(values.cols()) + " columns");
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j)
      out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line, ',');
    if (line_no == 1 && !fields.empty()) {
      // A header is any first line with a non-numeric field; "1" alone may name a constant term.
      const bool numeric = std::all_of(fields.begin(), fields.end(), [](const std::string& f) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        return ec == std::errc{} && ptr == f.data() + f.size();
      });
      if (!numeric) {
        table.header = fields;
        cols = fields.size();
        continue;
      }
    }
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " fields, got " + std::to_string(fields.size()));
    for (const auto& f : fields) data.push_back(parse_double(f, path, line_no));
    ++rows;
  }
  table.values = Matrix(rows, cols);
  std::copy(data.begin(), data.end(), table.values.data());
  return table;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  const std::size_t m = traj.states.cols();
  std::vector<std::string> header{"t"};
  for (std::size_t j = 0; j < m; ++j) header.push_back("x" + std::to_string(j + 1));
  Matrix out(traj.size(), m + 1);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out(i, 0) = traj.times[i];
    for (std::size_t j = 0; j < m; ++j) out(i, j + 1) = traj.states(i, j);
  }
  write_csv(path, header, out);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  if (t.values.cols() < 2) throw IoError("'" + path.string() + "': need a time column and states");
  Trajectory traj;
  traj.times = t.values.col(0);
  traj.states = t.values.col_slice(1, t.values.cols() - 1);
  if (traj.size() >= 2) uniform_spacing(traj.times);
  return traj;
}

void write_series(const std::filesystem::path& path, const MeasurementSeries& series) {
  Matrix out(series.size(), 2);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out(i, 0) = series.times[i];
    out(i, 1) = series.values[i];
  }
  write_csv(path, {"t", "y"}, out);
}

MeasurementSeries read_series(const std::filesystem::path& path, std::size_t column) {
  CsvTable t = read_csv(path);
  if (column == 0 || column >= t.values.cols())
    throw IoError("'" + path.string() + "': no data column " + std::to_string(column));
  MeasurementSeries s{t.values.col(0), t.values.col(column), std::nullopt};
  if (s.size() >= 2) uniform_spacing(s.times);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dsae::io
