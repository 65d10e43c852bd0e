#include "cdanse/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cdanse {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Frame {
    double x0 = 70, y0 = 40, w = 620, h = 420;  // plot area in px
    double kmax = 1;
    double lo = -12, hi = 1;  // log10 bounds

    double px(double k) const { return x0 + (k - 1.0) / std::max(1.0, kmax - 1.0) * w; }
    double py(double lv) const { return y0 + (hi - lv) / (hi - lo) * h; }
};

}  // namespace

void write_convergence_svg(const std::string& title, const std::vector<PlotCurve>& curves,
                           std::ostream& out) {
    if (curves.empty()) throw std::invalid_argument("write_convergence_svg: no curves");

    Frame f;
    double lo = 0.0, hi = -300.0;
    bool any = false;
    for (const PlotCurve& c : curves) {
        f.kmax = std::max(f.kmax, static_cast<double>(c.values.size()));
        for (double v : c.values) {
            if (!(v > 0.0) || !std::isfinite(v)) continue;
            const double lv = std::log10(v);
            lo = std::min(lo, lv);
            hi = std::max(hi, lv);
            any = true;
        }
    }
    if (!any) {
        lo = -1;
        hi = 1;
    }
    f.lo = std::floor(lo) - 0.2;
    f.hi = std::ceil(hi) + 0.2;

    const double W = f.x0 + f.w + 180, H = f.y0 + f.h + 60;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << f.x0 + f.w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    // frame and y grid at integer decades
    out << "<rect x=\"" << f.x0 << "\" y=\"" << f.y0 << "\" width=\"" << f.w << "\" height=\""
        << f.h << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int d = static_cast<int>(std::ceil(f.lo)); d <= static_cast<int>(std::floor(f.hi)); ++d) {
        const double y = f.py(d);
        out << "<line x1=\"" << f.x0 << "\" y1=\"" << y << "\" x2=\"" << f.x0 + f.w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n"
            << "<text x=\"" << f.x0 - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << d
            << "</text>\n";
    }
    const int kstep = std::max(1, static_cast<int>(f.kmax) / 10);
    for (int k = 1; k <= static_cast<int>(f.kmax); k += kstep) {
        const double x = f.px(k);
        out << "<text x=\"" << x << "\" y=\"" << f.y0 + f.h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << k
            << "</text>\n";
    }
    out << "<text x=\"" << f.x0 + f.w / 2 << "\" y=\"" << f.y0 + f.h + 42
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration"
        << "</text>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const PlotCurve& curve = curves[c];
        const char* color = kPalette[c % (sizeof kPalette / sizeof kPalette[0])];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        double last_x = f.x0, last_y = f.y0;
        for (std::size_t i = 0; i < curve.values.size(); ++i) {
            const double v = curve.values[i];
            if (!(v > 0.0) || !std::isfinite(v)) continue;
            last_x = f.px(static_cast<double>(i + 1));
            last_y = f.py(std::log10(v));
            out << last_x << ',' << last_y << ' ';
        }
        out << "\"/>\n";
        if (curve.diverged) {
            out << "<path d=\"M" << last_x - 5 << ' ' << last_y - 5 << " L" << last_x + 5 << ' '
                << last_y + 5 << " M" << last_x - 5 << ' ' << last_y + 5 << " L" << last_x + 5
                << ' ' << last_y - 5 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        }
        const double ly = f.y0 + 16 + 18 * static_cast<double>(c);
        out << "<line x1=\"" << f.x0 + f.w + 12 << "\" y1=\"" << ly << "\" x2=\""
            << f.x0 + f.w + 36 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << f.x0 + f.w + 42 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << curve.label << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace cdanse
