#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "roadid/error.hpp"

namespace roadid::svg {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct LineChart {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    bool log_x = false, log_y = false;
    int width = 800, height = 420;
};

namespace detail {

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

inline void save(const std::string& path, const std::string& body) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << body;
    if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace detail

/// Renders a static line chart; non-finite points (and non-positive ones on log axes) are skipped.
inline std::string render(const LineChart& c) {
    const double left = 70, right = 150, top = 36, bottom = 50;
    const double pw = c.width - left - right, ph = c.height - top - bottom;
    auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!c.log_x || x > 0.0) && (!c.log_y || y > 0.0);
    };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\">" << detail::escape(c.title) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
        const double sx = left + pw * t / 4.0, sy = top + ph - ph * t / 4.0;
        o << "<text x=\"" << sx << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
          << detail::num(c.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
          << detail::num(c.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << c.height - 10 << "\" text-anchor=\"middle\">"
      << detail::escape(c.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(c.y_label) << "</text>\n";

    for (std::size_t s = 0; s < c.series.size(); ++s) {
        const auto& ser = c.series[s];
        o << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << detail::palette(s) << "\" points=\"";
        for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i)
            if (usable(ser.x[i], ser.y[i])) o << px(ser.x[i]) << ',' << py(ser.y[i]) << ' ';
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly << "\">" << detail::escape(ser.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void write(const std::string& path, const LineChart& c) { detail::save(path, render(c)); }

/// Heat map of z over a regular (x, y) grid given as flat triples; +inf cells are drawn grey.
inline std::string render_heatmap(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& z) {
    std::vector<double> xs = x, ys = y;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    double zlo = std::numeric_limits<double>::infinity(), zhi = -zlo;
    for (double v : z)
        if (std::isfinite(v) && v > 0.0) {
            zlo = std::min(zlo, std::log10(v));
            zhi = std::max(zhi, std::log10(v));
        }
    if (!std::isfinite(zlo)) zlo = 0, zhi = 1;
    if (zhi == zlo) zhi = zlo + 1;

    const double left = 70, top = 36, pw = 600, ph = 360;
    const double cw = pw / static_cast<double>(std::max<std::size_t>(xs.size(), 1));
    const double ch = ph / static_cast<double>(std::max<std::size_t>(ys.size(), 1));
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"460\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\">" << detail::escape(title) << " (colour: log10)</text>\n";
    for (std::size_t i = 0; i < std::min({x.size(), y.size(), z.size()}); ++i) {
        const auto ix = static_cast<double>(std::lower_bound(xs.begin(), xs.end(), x[i]) - xs.begin());
        const auto iy = static_cast<double>(std::lower_bound(ys.begin(), ys.end(), y[i]) - ys.begin());
        std::string fill = "#bbbbbb";
        if (std::isfinite(z[i]) && z[i] > 0.0) {
            const double t = (std::log10(z[i]) - zlo) / (zhi - zlo);
            const int r = static_cast<int>(255 * t), b = static_cast<int>(255 * (1 - t));
            std::ostringstream f;
            f << "rgb(" << r << ",60," << b << ")";
            fill = f.str();
        }
        o << "<rect x=\"" << left + ix * cw << "\" y=\"" << top + ph - (iy + 1) * ch << "\" width=\"" << cw + 0.5
          << "\" height=\"" << ch + 0.5 << "\" fill=\"" << fill << "\"/>\n";
    }
    if (!xs.empty() && !ys.empty()) {
        o << "<text x=\"" << left << "\" y=\"" << top + ph + 16 << "\">" << detail::num(xs.front()) << "</text>\n";
        o << "<text x=\"" << left + pw << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"end\">" << detail::num(xs.back())
          << "</text>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">" << detail::num(ys.front()) << "</text>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << detail::num(ys.back()) << "</text>\n";
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 36 << "\" text-anchor=\"middle\">" << detail::escape(x_label)
      << "</text>\n";
    o << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(y_label)
      << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

inline void write_heatmap(const std::string& path, const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& z) {
    detail::save(path, render_heatmap(title, x_label, y_label, x, y, z));
}

}  // namespace roadid::svg
