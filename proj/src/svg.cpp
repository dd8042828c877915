// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ngrpo {

namespace {

constexpr double kW = 720.0, kH = 440.0;
constexpr double kPad = 50.0;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
  double to_px(double v, double px_lo, double px_hi) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void open_svg(std::ofstream& out, const std::string& title,
              const std::string& annotation) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  if (!annotation.empty()) out << "<!-- " << annotation << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
}

void axes(std::ofstream& out, const Range& rx, const Range& ry) {
  out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad
      << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad
      << "\" y2=\"" << kH - kPad << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
    const double fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
    const double px = rx.to_px(fx, kPad, kW - kPad);
    const double py = ry.to_px(fy, kH - kPad, kPad);
    out << "<text x=\"" << px << "\" y=\"" << kH - kPad + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(fx) << "</text>\n";
    out << "<text x=\"" << kPad - 6 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(fy) << "</text>\n";
  }
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series,
                     const std::string& annotation) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot write " + path);
  Range rx, ry;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.ys.size(); ++i) {
      rx.include(s.xs.empty() ? static_cast<double>(i) : s.xs[i]);
      ry.include(s.ys[i]);
    }
  }
  rx.pad();
  ry.pad();
  open_svg(out, title, annotation);
  axes(out, rx, ry);
  double ly = kPad + 8;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.ys.size(); ++i) {
      const double x = s.xs.empty() ? static_cast<double>(i) : s.xs[i];
      out << fmt(rx.to_px(x, kPad, kW - kPad)) << ","
          << fmt(ry.to_px(s.ys[i], kH - kPad, kPad)) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << kW - kPad - 4 << "\" y=\"" << ly
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << s.color << "\">" << s.label << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<SvgScatter>& groups,
                       const std::string& annotation) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot write " + path);
  Range rx, ry;
  for (const auto& g : groups)
    for (const auto& p : g.points) {
      if (p.size() < 2) throw std::invalid_argument("scatter needs 2-D points");
      rx.include(p[0]);
      ry.include(p[1]);
    }
  rx.pad();
  ry.pad();
  open_svg(out, title, annotation);
  axes(out, rx, ry);
  double ly = kPad + 8;
  for (const auto& g : groups) {
    for (const auto& p : g.points)
      out << "<circle cx=\"" << fmt(rx.to_px(p[0], kPad, kW - kPad)) << "\" cy=\""
          << fmt(ry.to_px(p[1], kH - kPad, kPad))
          << "\" r=\"2\" fill=\"" << g.color << "\" fill-opacity=\"0.6\"/>\n";
    out << "<text x=\"" << kW - kPad - 4 << "\" y=\"" << ly
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << g.color << "\">" << g.label << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

}  // namespace ngrpo
