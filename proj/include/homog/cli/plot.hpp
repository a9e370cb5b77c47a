#pragma once

#include "homog/expansion/report.hpp"

#include <filesystem>

namespace homog {

struct PlotFiles {
  std::string data_path;
  std::string svg_path;
  bool has_fit = false;
  std::array<Real, 2> fit_x{};  // log ε at the ends of the drawn fit line
  std::array<Real, 2> fit_y{};  // log value at the ends
  Real drawn_slope() const { return (fit_y[1] - fit_y[0]) / (fit_x[1] - fit_x[0]); }
};

namespace plot {

/// ASCII letters, digits, '-', '_' and '.' are kept; every other code point becomes '_'.
inline std::string sanitize(const std::string& name) {
  std::string out;
  for (std::size_t i = 0; i < name.size();) {
    const auto c = static_cast<unsigned char>(name[i]);
    int len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (len == 1 && (std::isalnum(c) || c == '-' || c == '_' || c == '.'))
      out += static_cast<char>(c);
    else
      out += '_';
    i += len;
  }
  if (out.empty() || out == "." || out == "..") out = "quantity";
  return out;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace plot

/// Two-column data file and an SVG log-log quick-look with the fitted line.
inline PlotFiles emit_plotdata(const ConvergenceReport& r, const std::string& dir) {
  if (r.rows.empty()) throw Error("cli", ErrorCode::EmptyReport, cat("report '", r.quantity, "' has no rows"));
  std::filesystem::create_directories(dir);
  const std::string base = plot::sanitize(r.quantity);
  PlotFiles pf;
  pf.data_path = (std::filesystem::path(dir) / (base + ".dat")).string();
  pf.svg_path = (std::filesystem::path(dir) / (base + ".svg")).string();
  {
    auto out = io::open_output(pf.data_path);
    out << "# epsilon value\n";
    for (const auto& [e, v] : r.rows) out << e << ' ' << v << '\n';
  }

  std::vector<std::pair<Real, Real>> pts;
  for (const auto& [e, v] : r.rows)
    if (v > 0) pts.emplace_back(std::log10(e), std::log10(v));
  Real x0 = -1, x1 = 0, y0 = -1, y1 = 0;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  pf.has_fit = r.fitted && std::isfinite(r.slope);
  if (pf.has_fit) {
    // natural-log fit drawn in decades
    const Real ln10 = std::log(10.0);
    pf.fit_x = {x0, x1};
    for (int k = 0; k < 2; ++k) {
      pf.fit_y[k] = (r.intercept + r.slope * pf.fit_x[k] * ln10) / ln10;
      y0 = std::min(y0, pf.fit_y[k]);
      y1 = std::max(y1, pf.fit_y[k]);
    }
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const Real w = 480, h = 360, m = 50;
  auto sx = [&](Real x) { return m + (x - x0) / (x1 - x0) * (w - 2 * m); };
  auto sy = [&](Real y) { return h - m - (y - y0) / (y1 - y0) * (h - 2 * m); };
  auto out = io::open_output(pf.svg_path);
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m << "\" height=\"" << h - 2 * m
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << m << "\" y=\"" << m - 10 << "\" font-size=\"14\">" << plot::svg_escape(r.quantity);
  if (pf.has_fit) out << " (slope " << r.slope << ")";
  out << "</text>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" font-size=\"12\">log10 epsilon</text>\n";
  out << "<text x=\"12\" y=\"" << h / 2 << "\" font-size=\"12\">log10 value</text>\n";
  for (const auto& [x, y] : pts) out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\"black\"/>\n";
  if (pf.has_fit)
    out << "<line x1=\"" << sx(pf.fit_x[0]) << "\" y1=\"" << sy(pf.fit_y[0]) << "\" x2=\"" << sx(pf.fit_x[1]) << "\" y2=\""
        << sy(pf.fit_y[1]) << "\" stroke=\"red\"/>\n";
  out << "</svg>\n";
  return pf;
}

}  // namespace homog
