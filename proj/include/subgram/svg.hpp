// Static SVG figures: polyline charts (optionally log-y, dashed series for
// baselines) and grayscale heatmaps for attention maps. Output is
// self-contained markup with no external assets.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "subgram/matrix.hpp"

namespace subgram {

struct LineSeries {
    std::string name;
    std::vector<double> x, y;
    bool dashed = false;
    std::string color = "#1f6fb2";
};

namespace svgdetail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f6fb2", "#d1495b", "#3c8d40", "#8d5fb2",
                                   "#c77f2e", "#2e8b8b", "#7a7a7a"};
    return colors[i % 7];
}

} // namespace svgdetail

inline std::string line_chart_svg(const std::vector<LineSeries>& series, const std::string& title,
                                  const std::string& xlabel, const std::string& ylabel,
                                  bool log_y = false) {
    const int W = 760, H = 480;
    const int ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yv = s.y[i];
            if (log_y) {
                if (!(yv > 0.0)) continue;
                yv = std::log10(yv);
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
        }
    }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) {
        const double v = log_y ? std::log10(y) : y;
        return mt + (1.0 - (v - ymin) / (ymax - ymin)) * ph;
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double gx = px(fx);
        out << "<line x1=\"" << gx << "\" y1=\"" << mt + ph << "\" x2=\"" << gx << "\" y2=\""
            << mt + ph + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << gx << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << svgdetail::num(fx) << "</text>\n";
        const double fyv = ymin + (ymax - ymin) * i / 5.0;
        const double gy = mt + (1.0 - static_cast<double>(i) / 5.0) * ph;
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << gy << "\" x2=\"" << ml << "\" y2=\"" << gy
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << gy + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << svgdetail::num(log_y ? std::pow(10.0, fyv) : fyv) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << xlabel
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << ylabel << "</text>\n";

    std::size_t color_idx = 0;
    double legend_y = mt + 8;
    for (const auto& s : series) {
        const std::string color = s.color.empty() ? svgdetail::palette(color_idx) : s.color;
        ++color_idx;
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
        if (s.dashed) out << " stroke-dasharray=\"6,4\"";
        out << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (log_y && !(s.y[i] > 0.0)) continue;
            out << svgdetail::num(px(s.x[i])) << "," << svgdetail::num(py(s.y[i])) << " ";
        }
        out << "\"/>\n";
        out << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << legend_y << "\" x2=\""
            << ml + pw - 130 << "\" y2=\"" << legend_y << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        out << "<text x=\"" << ml + pw - 124 << "\" y=\"" << legend_y + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.name << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
    return out.str();
}

// Grayscale heatmap: cell brightness is linear in the value (0 -> white,
// max -> black), which keeps the ramp monotone.
inline std::string heatmap_svg(const Matrix& m, const std::string& title) {
    const int cell = std::max(2, static_cast<int>(420 / std::max<std::size_t>(1, m.rows())));
    const int ml = 40, mt = 40;
    const int W = ml + cell * static_cast<int>(m.cols()) + 20;
    const int H = mt + cell * static_cast<int>(m.rows()) + 20;
    double vmax = 0.0;
    for (double v : m.data()) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const int level = static_cast<int>(255.0 * (1.0 - std::min(1.0, m(i, j) / vmax)));
            out << "<rect x=\"" << ml + cell * static_cast<int>(j) << "\" y=\""
                << mt + cell * static_cast<int>(i) << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"rgb(" << level << "," << level << "," << level << ")\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace subgram
