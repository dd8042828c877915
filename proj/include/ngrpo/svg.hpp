// SPDX-License-Identifier: Apache-2.0
//
// Minimal self-contained SVG emitter: polyline curves and scatter plots.
// CSV stays the authoritative output; these are quick-look artifacts.

#ifndef NGRPO_SVG_HPP_
#define NGRPO_SVG_HPP_

#include <string>
#include <vector>

#include "ngrpo/mathcore.hpp"

namespace ngrpo {

struct SvgSeries {
  std::string label;
  std::string color;  // css color
  std::vector<double> ys;
  std::vector<double> xs;  // optional; defaults to the index
};

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series,
                     const std::string& annotation = "");

struct SvgScatter {
  std::string label;
  std::string color;
  std::vector<Vec> points;  // 2-D points
};

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<SvgScatter>& groups,
                       const std::string& annotation = "");

}  // namespace ngrpo

#endif  // NGRPO_SVG_HPP_
