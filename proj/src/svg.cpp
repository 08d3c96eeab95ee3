#include "dsae/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dsae/io.hpp"

namespace dsae::svg {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string line_plot(const std::vector<Series>& series, const PlotOptions& opts) {
  const double left = 70, right = 20, top = 36, bottom = 48;
  const double W = opts.width, H = opts.height;
  const double pw = W - left - right, ph = H - top - bottom;

  auto ty = [&](double y) { return opts.log_y ? std::log10(y) : y; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      const double y = ty(s.y[i]);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\"" << opts.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 4.0, fy = ymin + (ymax - ymin) * k / 4.0;
    s << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">" << tick(fx)
      << "</text>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
      << (opts.log_y ? "1e" + tick(fy) : tick(fy)) << "</text>\n";
  }
  s << "<text x=\"" << num(W / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(opts.title)
    << "</text>\n"
    << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 8) << "\" text-anchor=\"middle\">"
    << escape(opts.xlabel) << "</text>\n"
    << "<text x=\"14\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << num(top + ph / 2) << ")\">" << escape(opts.ylabel) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& ser = series[k];
    const char* color = kColors[k % std::size(kColors)];
    s << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      const double y = ty(ser.y[i]);
      if (!std::isfinite(ser.x[i]) || !std::isfinite(y)) continue;
      s << num(px(ser.x[i])) << ',' << num(py(y)) << ' ';
    }
    s << "\"/>\n";
    if (!ser.label.empty())
      s << "<text x=\"" << num(left + pw - 6) << "\" y=\"" << num(top + 16 + 14.0 * k)
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(ser.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, const PlotOptions& opts) {
  io::write_text(path, line_plot(series, opts));
}

}  // namespace dsae::svg
