#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdanse {

/// One convergence curve: positive values per iteration, log y scale.
struct PlotCurve {
    std::string label;
    std::vector<double> values;
    bool diverged = false;  // truncation marker drawn at the last point
};

/// Self-contained SVG, no external renderer: log-scale y axis, one
/// polyline per curve, legend top-right. Throws on an empty curve set.
void write_convergence_svg(const std::string& title, const std::vector<PlotCurve>& curves,
                           std::ostream& out);

}  // namespace cdanse
