#pragma once

#include <optional>
#include <string>
#include <vector>

namespace implreg::svg {

struct Series {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

struct Threshold {
    double value = 0.0;
    std::string label;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::optional<Threshold> threshold;  ///< horizontal dashed line
    bool log_x = false;
};

/// Rows are y categories (top to bottom), columns x categories; linear color scale.
struct Heatmap {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> x_ticks;
    std::vector<std::string> y_ticks;
    std::vector<std::vector<double>> values;
};

/// Static SVG documents, deterministic for fixed input.
std::string render(const LinePlot& plot);
std::string render(const Heatmap& map);

}  // namespace implreg::svg
