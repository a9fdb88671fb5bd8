#include "melpc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "melpc/common.hpp"
#include "melpc/stats.hpp"

namespace melpc::svg {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Ticks {
    std::vector<double> values;
};

Ticks nice_ticks(double lo, double hi, int target = 5) {
    Ticks t;
    if (hi <= lo) {
        t.values = {lo};
        return t;
    }
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    }
    const double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + step * 1e-9; v += step) t.values.push_back(v);
    return t;
}

}  // namespace

std::string render_plot(const std::vector<Series>& series, const PlotOptions& opt) {
    if (series.empty()) throw DataError("plot: no series");
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    bool first = true;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw DataError("plot: series x/y lengths differ");
        if (s.x.empty()) throw DataError("plot: empty series");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                throw DataError("plot: non-finite data point");
            if (first) {
                x_lo = x_hi = s.x[i];
                y_lo = y_hi = s.y[i];
                first = false;
            }
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (x_hi == x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_hi == y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    // 5% padding around the data.
    const double xpad = 0.05 * (x_hi - x_lo), ypad = 0.05 * (y_hi - y_lo);
    x_lo -= xpad;
    x_hi += xpad;
    y_lo -= ypad;
    y_hi += ypad;

    const int ml = 64, mr = 16, mt = opt.title.empty() ? 16 : 36, mb = 48;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"15\">" << escape(opt.title) << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (double v : nice_ticks(x_lo, x_hi).values) {
        out << "<line x1=\"" << num(px(v)) << "\" y1=\"" << mt + ph << "\" x2=\"" << num(px(v))
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(px(v)) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(v)
            << "</text>\n";
    }
    for (double v : nice_ticks(y_lo, y_hi).values) {
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(py(v)) << "\" x2=\"" << ml
            << "\" y2=\"" << num(py(v)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << num(py(v) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v)
            << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(opt.x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << escape(opt.y_label)
        << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
        if (opt.line) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < s.x.size(); ++i)
                out << (i ? " " : "") << num(px(s.x[i])) << "," << num(py(s.y[i]));
            out << "\"/>\n";
        }
        if (opt.scatter) {
            for (size_t i = 0; i < s.x.size(); ++i)
                out << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        if (opt.fit_line && s.x.size() >= 3) {
            stats::RegressionResult fit = stats::ols_regress(s.x, s.y);
            const double fx0 = *std::min_element(s.x.begin(), s.x.end());
            const double fx1 = *std::max_element(s.x.begin(), s.x.end());
            out << "<line x1=\"" << num(px(fx0)) << "\" y1=\""
                << num(py(fit.intercept + fit.slope * fx0)) << "\" x2=\"" << num(px(fx1))
                << "\" y2=\"" << num(py(fit.intercept + fit.slope * fx1)) << "\" stroke=\""
                << color << "\" stroke-dasharray=\"6 4\"/>\n";
        }
        if (!s.name.empty()) {
            out << "<text x=\"" << ml + pw - 6 << "\" y=\"" << mt + 16 + 16 * si
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
                << color << "\">" << escape(s.name) << "</text>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace melpc::svg
