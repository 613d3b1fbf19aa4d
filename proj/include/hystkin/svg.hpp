#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hystkin/errors.hpp"

namespace hystkin {

// Minimal deterministic SVG plotter: polylines and scatter markers over a
// framed, ticked coordinate box. No timestamps or external dependencies, so
// identical inputs give identical bytes.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add_line(std::vector<double> xs, std::vector<double> ys, std::string color,
                  std::string label = "") {
        add_series(Series{std::move(xs), std::move(ys), std::move(color), std::move(label), false});
    }

    void add_scatter(std::vector<double> xs, std::vector<double> ys, std::string color,
                     std::string label = "") {
        add_series(Series{std::move(xs), std::move(ys), std::move(color), std::move(label), true});
    }

    std::string render(int width = 760, int height = 520) const {
        if (series_.empty()) raise(ErrorKind::bad_config, "plot has no data");
        double x_lo = std::numeric_limits<double>::infinity();
        double x_hi = -x_lo;
        double y_lo = x_lo;
        double y_hi = -x_lo;
        for (const Series& s : series_) {
            for (double v : s.xs) {
                x_lo = std::min(x_lo, v);
                x_hi = std::max(x_hi, v);
            }
            for (double v : s.ys) {
                y_lo = std::min(y_lo, v);
                y_hi = std::max(y_hi, v);
            }
        }
        if (x_hi <= x_lo) x_hi = x_lo + 1.0;
        if (y_hi <= y_lo) y_hi = y_lo + 1.0;
        const double x_pad = 0.04 * (x_hi - x_lo);
        const double y_pad = 0.06 * (y_hi - y_lo);
        x_lo -= x_pad;
        x_hi += x_pad;
        y_lo -= y_pad;
        y_hi += y_pad;

        const double left = 70.0;
        const double right = width - 20.0;
        const double top = 40.0;
        const double bottom = height - 50.0;
        const auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
        const auto py = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };

        std::ostringstream svg;
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
        svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg << "<text x=\"" << (width / 2) << "\" y=\"22\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title_) << "</text>\n";

        // Frame and ticks.
        svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << (right - left)
            << "\" height=\"" << (bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double t : ticks(x_lo, x_hi)) {
            svg << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << bottom << "\" x2=\"" << fmt(px(t))
                << "\" y2=\"" << (bottom + 5.0) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << fmt(px(t)) << "\" y=\"" << (bottom + 18.0)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << tick_text(t) << "</text>\n";
        }
        for (double t : ticks(y_lo, y_hi)) {
            svg << "<line x1=\"" << (left - 5.0) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << left
                << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"black\"/>\n";
            svg << "<text x=\"" << (left - 8.0) << "\" y=\"" << fmt(py(t) + 4.0)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
                << tick_text(t) << "</text>\n";
        }
        svg << "<text x=\"" << (0.5 * (left + right)) << "\" y=\"" << (height - 12.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
            << escape(x_label_) << "</text>\n";
        svg << "<text x=\"16\" y=\"" << (0.5 * (top + bottom))
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
            << "transform=\"rotate(-90 16 " << (0.5 * (top + bottom)) << ")\">" << escape(y_label_)
            << "</text>\n";

        for (const Series& s : series_) {
            if (s.scatter) {
                for (std::size_t i = 0; i < s.xs.size(); ++i) {
                    svg << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\"" << fmt(py(s.ys[i]))
                        << "\" r=\"2\" fill=\"" << s.color << "\" fill-opacity=\"0.55\"/>\n";
                }
            } else {
                svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" points=\"";
                for (std::size_t i = 0; i < s.xs.size(); ++i) {
                    if (i != 0) svg << ' ';
                    svg << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys[i]));
                }
                svg << "\"/>\n";
            }
        }

        // Legend, top-right inside the frame.
        double ly = top + 16.0;
        for (const Series& s : series_) {
            if (s.label.empty()) continue;
            svg << "<rect x=\"" << (right - 150.0) << "\" y=\"" << (ly - 9.0)
                << "\" width=\"12\" height=\"9\" fill=\"" << s.color << "\"/>\n";
            svg << "<text x=\"" << (right - 133.0) << "\" y=\"" << ly
                << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label) << "</text>\n";
            ly += 16.0;
        }
        svg << "</svg>\n";
        return svg.str();
    }

private:
    struct Series {
        std::vector<double> xs;
        std::vector<double> ys;
        std::string color;
        std::string label;
        bool scatter = false;
    };

    void add_series(Series s) {
        if (s.xs.size() != s.ys.size())
            raise(ErrorKind::bad_config, "series x/y lengths differ");
        if (!s.xs.empty()) series_.push_back(std::move(s));
    }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    }

    static std::string tick_text(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    }

    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '&')
                out += "&amp;";
            else if (c == '<')
                out += "&lt;";
            else if (c == '>')
                out += "&gt;";
            else
                out += c;
        }
        return out;
    }

    // Round tick spacing to a 1/2/5 decade step giving 4..9 ticks.
    static std::vector<double> ticks(double lo, double hi) {
        const double span = hi - lo;
        double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
        for (double mult : {1.0, 2.0, 5.0, 10.0}) {
            if (span / (step * mult) <= 8.0) {
                step *= mult;
                break;
            }
        }
        std::vector<double> out;
        double t = std::ceil(lo / step) * step;
        for (; t <= hi + 1e-12 * span; t += step) out.push_back(t == 0.0 ? 0.0 : t);
        return out;
    }

    std::string title_;
    std::string x_label_;
    std::string y_label_;
    std::vector<Series> series_;
};

}  // namespace hystkin
