#pragma once

#include <string>
#include <vector>

namespace melpc::svg {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct PlotOptions {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "y";
    bool line = true;      // one <polyline> per series
    bool scatter = false;  // <circle> markers
    bool fit_line = false; // dashed OLS line per series (needs >= 3 points)
    int width = 720;
    int height = 480;
};

// Dependency-free SVG plot: axes and ticks are <line>/<text> elements, so
// polyline counts stay attributable to the data series.
std::string render_plot(const std::vector<Series>& series, const PlotOptions& opt);

}  // namespace melpc::svg
