#pragma once

// Static SVG figures: grouped bar charts with +-1 std error bars and an
// optional dashed baseline, and a heat grid for the correlation matrix.
// Output is a pure function of the input (fixed number formatting, no
// timestamps), so reruns are byte-identical.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cprobe/attribution.hpp"
#include "cprobe/error.hpp"

namespace cprobe {

struct BarSeries {
    std::string name;
    std::vector<std::string> labels;
    std::vector<double> values;
    std::vector<double> errors;
    std::optional<double> baseline;

    void validate() const {
        if (labels.size() != values.size() || labels.size() != errors.size())
            throw ValidationError("bar series '" + name + "': labels, values and errors differ in length");
        for (double e : errors)
            if (!(e >= 0.0)) throw ValidationError("bar series '" + name + "': negative error");
    }
};

namespace svg_detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace svg_detail

inline std::string render_bars(const std::vector<BarSeries>& series) {
    using namespace svg_detail;
    if (series.empty()) throw ValidationError("bar chart needs at least one series");
    for (const auto& s : series) s.validate();

    constexpr double bar_w = 18, bar_gap = 4, group_gap = 28, left = 56, top = 24, plot_h = 240, bottom = 72;
    double plot_w = 0;
    for (const auto& s : series) plot_w += static_cast<double>(s.labels.size()) * (bar_w + bar_gap) + group_gap;
    const double width = left + plot_w + 16, height = top + plot_h + bottom;
    const auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
      << "\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    // y axis, fixed to [0, 1]
    o << "<g class=\"axis\" stroke=\"#333\" fill=\"none\">\n";
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\"" << num(top + plot_h) << "\"/>\n";
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\"/>\n";
    o << "</g>\n<g class=\"ticks\" text-anchor=\"end\">\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = t / 4.0;
        o << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y_of(v)) << "\" x2=\"" << num(left) << "\" y2=\"" << num(y_of(v))
          << "\" stroke=\"#333\"/>\n";
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y_of(v) + 3) << "\">" << num(v) << "</text>\n";
    }
    o << "</g>\n";

    double x = left + group_gap / 2;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % std::size(palette)];
        const double group_x0 = x;
        o << "<g class=\"series\" data-name=\"" << escape(s.name) << "\">\n";
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double v = std::clamp(s.values[i], 0.0, 1.0);
            o << "<rect class=\"bar\" x=\"" << num(x) << "\" y=\"" << num(y_of(v)) << "\" width=\"" << num(bar_w)
              << "\" height=\"" << num(plot_h * v) << "\" fill=\"" << color << "\"/>\n";
            const double cx = x + bar_w / 2;
            if (s.errors[i] > 0.0) {
                const double lo = y_of(s.values[i] - s.errors[i]), hi = y_of(s.values[i] + s.errors[i]);
                o << "<path class=\"errorbar\" d=\"M" << num(cx) << ' ' << num(lo) << "V" << num(hi) << "M" << num(cx - 4) << ' '
                  << num(lo) << "H" << num(cx + 4) << "M" << num(cx - 4) << ' ' << num(hi) << "H" << num(cx + 4)
                  << "\" stroke=\"#111\" fill=\"none\"/>\n";
            }
            o << "<text x=\"" << num(cx) << "\" y=\"" << num(top + plot_h + 12) << "\" text-anchor=\"middle\">"
              << escape(s.labels[i]) << "</text>\n";
            x += bar_w + bar_gap;
        }
        if (s.baseline) {
            o << "<line class=\"baseline\" x1=\"" << num(group_x0 - 2) << "\" y1=\"" << num(y_of(*s.baseline)) << "\" x2=\""
              << num(x - bar_gap + 2) << "\" y2=\"" << num(y_of(*s.baseline))
              << "\" stroke=\"#000\" stroke-dasharray=\"4 3\"/>\n";
        }
        o << "<text x=\"" << num((group_x0 + x - bar_gap) / 2) << "\" y=\"" << num(top + plot_h + 30)
          << "\" text-anchor=\"middle\" font-weight=\"bold\">" << escape(s.name) << "</text>\n";
        o << "</g>\n";
        x += group_gap;
    }
    o << "</svg>\n";
    return o.str();
}

inline void emit_bars(const std::vector<BarSeries>& series, const std::filesystem::path& path) {
    svg_detail::write_file(path, render_bars(series));
}

// Linear ramp from white (0) to dark blue (1).
inline std::string ramp_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    const auto lerp = [&](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * v)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", lerp(255, 8), lerp(255, 48), lerp(255, 107));
    return buf;
}

inline std::string render_heatgrid(const CorrelationMatrix& mx) {
    using namespace svg_detail;
    if (mx.pano_classes.empty() || mx.intent_classes.empty()) throw ValidationError("heat grid needs a non-empty matrix");
    constexpr double cell = 24, left = 120, top = 110;
    const double width = left + cell * static_cast<double>(mx.intent_classes.size()) + 16;
    const double height = top + cell * static_cast<double>(mx.pano_classes.size()) + 16;

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
      << "\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    o << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">"
         "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#999\" stroke-width=\"2\"/></pattern></defs>\n";
    for (std::size_t m = 0; m < mx.intent_classes.size(); ++m) {
        const double cx = left + cell * (static_cast<double>(m) + 0.5);
        o << "<text x=\"" << num(cx) << "\" y=\"" << num(top - 6) << "\" transform=\"rotate(-60 " << num(cx) << ' ' << num(top - 6)
          << ")\">" << escape(mx.intent_classes[m]) << "</text>\n";
    }
    for (std::size_t p = 0; p < mx.pano_classes.size(); ++p) {
        const double y = top + cell * static_cast<double>(p);
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + cell / 2 + 3) << "\" text-anchor=\"end\">"
          << escape(mx.pano_classes[p]) << "</text>\n";
        for (std::size_t m = 0; m < mx.intent_classes.size(); ++m) {
            const double x = left + cell * static_cast<double>(m);
            const auto& v = mx.value(p, m);
            o << "<rect class=\"" << (v ? "cell" : "cell absent") << "\" x=\"" << num(x) << "\" y=\"" << num(y)
              << "\" width=\"" << num(cell) << "\" height=\"" << num(cell) << "\" fill=\""
              << (v ? ramp_color(*v) : std::string("url(#hatch)")) << "\" stroke=\"#fff\">";
            o << "<title>" << escape(mx.pano_classes[p]) << " / " << escape(mx.intent_classes[m]) << ": "
              << (v ? num(*v) : std::string("absent")) << "</title></rect>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

inline void emit_heatgrid(const CorrelationMatrix& mx, const std::filesystem::path& path) {
    svg_detail::write_file(path, render_heatgrid(mx));
}

}  // namespace cprobe
