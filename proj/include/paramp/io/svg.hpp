#ifndef PARAMP_IO_SVG_HPP
#define PARAMP_IO_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace paramp::io {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Standalone SVG line plot with axes, min/max tick labels and a legend.
/// Non-finite samples break the polyline.
inline std::string svg_line_plot(const std::string& title, const std::string& x_label,
                                 const std::string& y_label, const std::vector<Series>& series) {
    constexpr double kW = 640, kH = 420, kL = 80, kR = 20, kT = 40, kB = 60;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x1 > x0)) {
        x0 = std::isfinite(x0) ? x0 - 1 : 0;
        x1 = x0 + 2;
    }
    if (!(y1 > y0)) {
        y0 = std::isfinite(y0) ? y0 - 1 : 0;
        y1 = y0 + 2;
    }
    auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
    auto py = [&](double y) { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.6g", v);
        return std::string(b);
    };
    auto esc = [](const std::string& s) {
        std::string o;
        for (char c : s) {
            if (c == '<') o += "&lt;";
            else if (c == '>') o += "&gt;";
            else if (c == '&') o += "&amp;";
            else o += c;
        }
        return o;
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
           esc(title) + "</text>\n";
    out += "<rect x=\"" + num(kL) + "\" y=\"" + num(kT) + "\" width=\"" + num(kW - kL - kR) +
           "\" height=\"" + num(kH - kT - kB) + "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(kL) + "\" y=\"" + num(kH - kB + 16) + "\">" + num(x0) + "</text>\n";
    out += "<text x=\"" + num(kW - kR) + "\" y=\"" + num(kH - kB + 16) +
           "\" text-anchor=\"end\">" + num(x1) + "</text>\n";
    out += "<text x=\"" + num(kL - 4) + "\" y=\"" + num(kH - kB) + "\" text-anchor=\"end\">" +
           num(y0) + "</text>\n";
    out += "<text x=\"" + num(kL - 4) + "\" y=\"" + num(kT + 10) + "\" text-anchor=\"end\">" +
           num(y1) + "</text>\n";
    out += "<text x=\"" + num(kW / 2) + "\" y=\"" + num(kH - 16) + "\" text-anchor=\"middle\">" +
           esc(x_label) + "</text>\n";
    out += "<text transform=\"translate(16," + num(kH / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + esc(y_label) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = colors[k % 5];
        std::string d;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen_down = false;
                continue;
            }
            d += (pen_down ? " L" : " M") + num(px(s.x[i])) + " " + num(py(s.y[i]));
            pen_down = true;
        }
        out += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + num(kL + 8) + "\" y=\"" + num(kT + 16 + 14 * k) + "\" fill=\"" +
               color + "\">" + esc(s.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace paramp::io

#endif  // PARAMP_IO_SVG_HPP
