#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "groklab/error.hpp"
#include "groklab/matrix.hpp"
#include "groklab/metrics.hpp"

// Self-contained SVG writers. All numeric output goes through fixed-precision
// std::to_chars, so a given input renders to identical bytes on every run.
namespace groklab::svg {

namespace detail {

inline std::string fmt(double v, int precision = 2) {
    if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, "svg: non-finite coordinate");
    }
    char buf[48];
    const auto res =
        std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

// Compact scientific-ish label for axis ticks.
inline std::string fmt_label(double v) {
    if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, "svg: non-finite tick label");
    }
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    return std::string(buf, res.ptr);
}

inline std::string escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string rgb(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
}

// Blue-white-red diverging map over [-1, 1]; inputs are clipped first.
inline std::string diverging_color(double v) {
    const double t = std::clamp(v, -1.0, 1.0);
    const auto lerp = [](int a, int b, double u) {
        return static_cast<int>(std::lround(static_cast<double>(a) +
                                            (static_cast<double>(b - a)) * u));
    };
    if (t < 0.0) {
        const double u = t + 1.0; // [-1,0] -> [0,1]
        return rgb(lerp(59, 255, u), lerp(76, 255, u), lerp(192, 255, u));
    }
    return rgb(lerp(255, 180, t), lerp(255, 4, t), lerp(255, 38, t));
}

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
        "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2"};
    return colors;
}

} // namespace detail

struct Series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct LineChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 420;
    std::vector<Series> series;
};

inline std::string line_chart(const LineChartSpec& spec) {
    if (spec.series.empty()) {
        fail(ErrorCode::EmptyInput, "line_chart: no series");
    }
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    bool first = true;
    for (const Series& s : spec.series) {
        if (s.xs.size() != s.ys.size() || s.xs.empty()) {
            fail(ErrorCode::InvalidArgument,
                 "line_chart: series '" + s.label + "' must have matching non-empty x/y");
        }
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (first) {
                x_lo = x_hi = s.xs[i];
                y_lo = y_hi = s.ys[i];
                first = false;
            }
            x_lo = std::min(x_lo, s.xs[i]);
            x_hi = std::max(x_hi, s.xs[i]);
            y_lo = std::min(y_lo, s.ys[i]);
            y_hi = std::max(y_hi, s.ys[i]);
        }
    }
    if (x_hi == x_lo) {
        x_hi = x_lo + 1.0;
    }
    if (y_hi == y_lo) {
        y_hi = y_lo + 1.0;
    }

    const double ml = 64.0, mr = 16.0, mt = 36.0, mb = 48.0;
    const double pw = static_cast<double>(spec.width) - ml - mr;
    const double ph = static_cast<double>(spec.height) - mt - mb;
    const auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    const auto py = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) +
           "\" viewBox=\"0 0 " + std::to_string(spec.width) + " " +
           std::to_string(spec.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::fmt(ml + pw / 2.0) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\" font-family=\"sans-serif\">" +
           detail::escape(spec.title) + "</text>\n";

    // frame and ticks
    out += "<rect x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt) + "\" width=\"" +
           detail::fmt(pw) + "\" height=\"" + detail::fmt(ph) +
           "\" fill=\"none\" stroke=\"#444444\"/>\n";
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * static_cast<double>(i) / ticks;
        const double fy = y_lo + (y_hi - y_lo) * static_cast<double>(i) / ticks;
        out += "<line x1=\"" + detail::fmt(px(fx)) + "\" y1=\"" + detail::fmt(mt + ph) +
               "\" x2=\"" + detail::fmt(px(fx)) + "\" y2=\"" + detail::fmt(mt + ph + 5.0) +
               "\" stroke=\"#444444\"/>\n";
        out += "<text x=\"" + detail::fmt(px(fx)) + "\" y=\"" + detail::fmt(mt + ph + 18.0) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
               detail::fmt_label(fx) + "</text>\n";
        out += "<line x1=\"" + detail::fmt(ml - 5.0) + "\" y1=\"" + detail::fmt(py(fy)) +
               "\" x2=\"" + detail::fmt(ml) + "\" y2=\"" + detail::fmt(py(fy)) +
               "\" stroke=\"#444444\"/>\n";
        out += "<text x=\"" + detail::fmt(ml - 8.0) + "\" y=\"" + detail::fmt(py(fy) + 4.0) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
               detail::fmt_label(fy) + "</text>\n";
    }
    out += "<text x=\"" + detail::fmt(ml + pw / 2.0) + "\" y=\"" +
           detail::fmt(static_cast<double>(spec.height) - 10.0) +
           "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" +
           detail::escape(spec.x_label) + "</text>\n";
    out += "<text x=\"16\" y=\"" + detail::fmt(mt + ph / 2.0) +
           "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 " +
           detail::fmt(mt + ph / 2.0) + ")\">" + detail::escape(spec.y_label) + "</text>\n";

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const Series& series = spec.series[s];
        const std::string& color = detail::palette()[s % detail::palette().size()];
        out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series.xs.size(); ++i) {
            if (i > 0) {
                out += ' ';
            }
            out += detail::fmt(px(series.xs[i])) + "," + detail::fmt(py(series.ys[i]));
        }
        out += "\"/>\n";
        // legend entry
        const double ly = mt + 14.0 + 16.0 * static_cast<double>(s);
        out += "<line x1=\"" + detail::fmt(ml + 8.0) + "\" y1=\"" + detail::fmt(ly - 4.0) +
               "\" x2=\"" + detail::fmt(ml + 28.0) + "\" y2=\"" + detail::fmt(ly - 4.0) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::fmt(ml + 34.0) + "\" y=\"" + detail::fmt(ly) +
               "\" font-size=\"11\" font-family=\"sans-serif\">" +
               detail::escape(series.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

// One square cell per matrix entry, diverging scale clipped to [-1, 1].
inline std::string heatmap(const Matrix& m, std::string_view title) {
    if (m.empty()) {
        fail(ErrorCode::EmptyInput, "heatmap: empty matrix");
    }
    const double cell = std::max(4.0, std::min(12.0, 480.0 / static_cast<double>(m.rows())));
    const double ml = 20.0, mt = 36.0;
    const int width = static_cast<int>(ml * 2.0 + cell * static_cast<double>(m.cols()));
    const int height = static_cast<int>(mt + 20.0 + cell * static_cast<double>(m.rows()));

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::fmt(static_cast<double>(width) / 2.0) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">" +
           detail::escape(title) + "</text>\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out += "<rect x=\"" + detail::fmt(ml + cell * static_cast<double>(c)) + "\" y=\"" +
                   detail::fmt(mt + cell * static_cast<double>(r)) + "\" width=\"" +
                   detail::fmt(cell) + "\" height=\"" + detail::fmt(cell) + "\" fill=\"" +
                   detail::diverging_color(m(r, c)) + "\"/>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

inline std::string histogram_chart(const Histogram& h, std::string_view title) {
    if (h.bins() == 0) {
        fail(ErrorCode::EmptyInput, "histogram_chart: no bins");
    }
    const int width = 720, height = 420;
    const double ml = 64.0, mr = 16.0, mt = 36.0, mb = 48.0;
    const double pw = static_cast<double>(width) - ml - mr;
    const double ph = static_cast<double>(height) - mt - mb;
    std::int64_t max_count = 1;
    for (std::int64_t c : h.counts) {
        max_count = std::max(max_count, c);
    }

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::fmt(ml + pw / 2.0) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\" font-family=\"sans-serif\">" +
           detail::escape(title) + "</text>\n";
    out += "<rect x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt) + "\" width=\"" +
           detail::fmt(pw) + "\" height=\"" + detail::fmt(ph) +
           "\" fill=\"none\" stroke=\"#444444\"/>\n";

    const double bw = pw / static_cast<double>(h.bins());
    for (int i = 0; i < h.bins(); ++i) {
        const double frac = static_cast<double>(h.counts[static_cast<std::size_t>(i)]) /
                            static_cast<double>(max_count);
        const double bar_h = frac * ph;
        if (bar_h <= 0.0) {
            continue;
        }
        out += "<rect x=\"" + detail::fmt(ml + bw * static_cast<double>(i)) + "\" y=\"" +
               detail::fmt(mt + ph - bar_h) + "\" width=\"" + detail::fmt(bw) +
               "\" height=\"" + detail::fmt(bar_h) + "\" fill=\"#1f77b4\"/>\n";
    }
    // edge labels plus a zero marker when the range straddles zero
    out += "<text x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt + ph + 18.0) +
           "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
           detail::fmt_label(h.lo) + "</text>\n";
    out += "<text x=\"" + detail::fmt(ml + pw) + "\" y=\"" + detail::fmt(mt + ph + 18.0) +
           "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
           detail::fmt_label(h.hi) + "</text>\n";
    if (h.lo < 0.0 && h.hi > 0.0) {
        const double zx = ml + (0.0 - h.lo) / (h.hi - h.lo) * pw;
        out += "<line x1=\"" + detail::fmt(zx) + "\" y1=\"" + detail::fmt(mt) + "\" x2=\"" +
               detail::fmt(zx) + "\" y2=\"" + detail::fmt(mt + ph) +
               "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
        out += "<text x=\"" + detail::fmt(zx) + "\" y=\"" + detail::fmt(mt + ph + 18.0) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">0</text>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace groklab::svg
