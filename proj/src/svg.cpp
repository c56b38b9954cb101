#include "implreg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace implreg::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string header(const std::string& title) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
        kWidth, kHeight, kWidth / 2, escape(title));
}

std::string axis_labels(const std::string& x_label, const std::string& y_label) {
    return fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n"
        "<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">{}</text>\n",
        kLeft + (kWidth - kLeft - kRight) / 2, kHeight - 12, escape(x_label),
        kTop + (kHeight - kTop - kBottom) / 2, kTop + (kHeight - kTop - kBottom) / 2,
        escape(y_label));
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi <= lo) hi = lo + 1;
    }
};

}  // namespace

std::string render(const LinePlot& plot) {
    for (const auto& s : plot.series)
        if (s.xs.size() != s.ys.size()) throw std::invalid_argument("series x/y lengths differ");
    auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
    Range xr, yr;
    for (const auto& s : plot.series) {
        for (double x : s.xs)
            if (!plot.log_x || x > 0) xr.add(tx(x));
        for (double y : s.ys) yr.add(y);
    }
    if (plot.threshold) yr.add(plot.threshold->value);
    xr.finish();
    yr.finish();
    const double pad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (tx(x) - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::string out = header(plot.title);
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       kLeft, kTop, pw, ph);
    for (int k = 0; k <= 4; ++k) {
        const double yv = yr.lo + (yr.hi - yr.lo) * k / 4.0;
        const double xv = xr.lo + (xr.hi - xr.lo) * k / 4.0;
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6,
                           py(yv) + 4, yv);
        const double shown = plot.log_x ? std::pow(10.0, xv) : xv;
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n",
                           kLeft + pw * k / 4.0, kTop + ph + 16, shown);
    }
    out += axis_labels(plot.x_label, plot.y_label);
    for (std::size_t i = 0; i < plot.series.size(); ++i) {
        const auto& s = plot.series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        std::string points;
        for (std::size_t k = 0; k < s.xs.size(); ++k) {
            if (!std::isfinite(s.ys[k]) || (plot.log_x && s.xs[k] <= 0)) continue;
            points += fmt::format("{:.2f},{:.2f} ", px(s.xs[k]), py(s.ys[k]));
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                           color, points);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", kLeft + 10,
                           kTop + 16 + 14.0 * static_cast<double>(i), color, escape(s.name));
    }
    if (plot.threshold) {
        const double y = py(plot.threshold->value);
        out += fmt::format(
            "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n",
            kLeft, y, kLeft + pw, y);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\" fill=\"gray\">{}</text>\n",
                           kLeft + pw - 4, y - 4, escape(plot.threshold->label));
    }
    out += "</svg>\n";
    return out;
}

std::string render(const Heatmap& map) {
    const std::size_t rows = map.values.size();
    const std::size_t cols = rows ? map.values.front().size() : 0;
    for (const auto& r : map.values)
        if (r.size() != cols) throw std::invalid_argument("heatmap rows differ in length");
    if (map.y_ticks.size() != rows || map.x_ticks.size() != cols)
        throw std::invalid_argument("heatmap tick count does not match values");
    Range vr;
    for (const auto& r : map.values)
        for (double v : r) vr.add(v);
    vr.finish();
    const double legend = 70;
    const double pw = kWidth - kLeft - kRight - legend, ph = kHeight - kTop - kBottom;
    const double cw = cols ? pw / static_cast<double>(cols) : pw;
    const double ch = rows ? ph / static_cast<double>(rows) : ph;
    auto color = [&](double v) {
        if (!std::isfinite(v)) return std::string("#cccccc");
        const double u = std::clamp((v - vr.lo) / (vr.hi - vr.lo), 0.0, 1.0);
        // dark blue to yellow
        const int r = static_cast<int>(std::lround(20 + u * (250 - 20)));
        const int g = static_cast<int>(std::lround(30 + u * (230 - 30)));
        const int b = static_cast<int>(std::lround(110 + u * (40 - 110)));
        return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
    };

    std::string out = header(map.title);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cols; ++k)
            out += fmt::format(
                "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                kLeft + cw * static_cast<double>(k), kTop + ch * static_cast<double>(i), cw + 0.05,
                ch + 0.05, color(map.values[i][k]));
    const std::size_t x_every = std::max<std::size_t>(1, cols / 8);
    for (std::size_t k = 0; k < cols; k += x_every)
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                           kLeft + cw * (static_cast<double>(k) + 0.5), kTop + ph + 16,
                           escape(map.x_ticks[k]));
    const std::size_t y_every = std::max<std::size_t>(1, rows / 12);
    for (std::size_t i = 0; i < rows; i += y_every)
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6,
                           kTop + ch * (static_cast<double>(i) + 0.5) + 4, escape(map.y_ticks[i]));
    out += axis_labels(map.x_label, map.y_label);
    const double lx = kLeft + pw + 20;
    for (int s = 0; s < 20; ++s) {
        const double v = vr.hi - (vr.hi - vr.lo) * s / 19.0;
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"14\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                           lx, kTop + ph * s / 20.0, ph / 20.0 + 0.05, color(v));
    }
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{:.3g}</text>\n", lx + 18, kTop + 10, vr.hi);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{:.3g}</text>\n", lx + 18, kTop + ph, vr.lo);
    out += "</svg>\n";
    return out;
}

}  // namespace implreg::svg
