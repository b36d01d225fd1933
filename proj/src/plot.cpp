#include "nimh/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nimh/errors.hpp"
#include "text_util.hpp"

namespace nimh {

namespace {

constexpr double kWidth = 960, kHeight = 600;
constexpr double kLeft = 72, kRight = 24, kTop = 24, kBottom = 52;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

double nice_step(double range, int target_ticks) {
    const double raw = range / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw)
            return m * mag;
    return 10.0 * mag;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
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

} // namespace

std::string render_svg(const std::vector<DischargeCurve>& curves,
                       const std::string& x_label, const std::string& y_label) {
    if (curves.empty())
        throw DomainError("render_svg: nothing to plot");
    for (const auto& c : curves) {
        if (c.size() == 0)
            throw DomainError("render_svg: empty curve");
        if (c.voltage_v.size() != c.time_s.size())
            throw DomainError("render_svg: malformed curve");
        for (std::size_t i = 0; i < c.size(); ++i)
            if (!std::isfinite(c.time_s[i]) || !std::isfinite(c.voltage_v[i]))
                throw DomainError("render_svg: non-finite sample");
    }

    double x0 = curves[0].time_s.front(), x1 = x0;
    double y0 = curves[0].voltage_v.front() * 1000.0, y1 = y0;
    for (const auto& c : curves) {
        for (double t : c.time_s) {
            x0 = std::min(x0, t);
            x1 = std::max(x1, t);
        }
        for (double v : c.voltage_v) {
            y0 = std::min(y0, v * 1000.0);
            y1 = std::max(y1, v * 1000.0);
        }
    }
    if (x1 - x0 <= 0.0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if (y1 - y0 <= 0.0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    const double xpad = 0.04 * (x1 - x0), ypad = 0.04 * (y1 - y0);
    x0 -= xpad;
    x1 += xpad;
    y0 -= ypad;
    y1 += ypad;

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"600\" "
           "viewBox=\"0 0 960 600\">\n";
    svg += "<rect width=\"960\" height=\"600\" fill=\"#ffffff\"/>\n";

    // grid and tick labels
    const double xstep = nice_step(x1 - x0, 6);
    const double ystep = nice_step(y1 - y0, 6);
    svg += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double gx = std::ceil(x0 / xstep) * xstep; gx <= x1 + 1e-9 * xstep; gx += xstep)
        svg += "<line x1=\"" + num(px(gx)) + "\" y1=\"" + num(kTop) + "\" x2=\"" +
               num(px(gx)) + "\" y2=\"" + num(kTop + ph) + "\"/>\n";
    for (double gy = std::ceil(y0 / ystep) * ystep; gy <= y1 + 1e-9 * ystep; gy += ystep)
        svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(gy)) + "\" x2=\"" +
               num(kLeft + pw) + "\" y2=\"" + num(py(gy)) + "\"/>\n";
    svg += "</g>\n";

    svg += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    for (double gx = std::ceil(x0 / xstep) * xstep; gx <= x1 + 1e-9 * xstep; gx += xstep)
        svg += "<text x=\"" + num(px(gx)) + "\" y=\"" + num(kTop + ph + 16) +
               "\" text-anchor=\"middle\">" + tick_label(gx) + "</text>\n";
    for (double gy = std::ceil(y0 / ystep) * ystep; gy <= y1 + 1e-9 * ystep; gy += ystep)
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(gy) + 4) +
               "\" text-anchor=\"end\">" + tick_label(gy) + "</text>\n";
    svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 8) +
           "\" text-anchor=\"middle\">" + escape_xml(x_label) + "</text>\n";
    svg += "<text x=\"16\" y=\"" + num(kTop + ph / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + num(kTop + ph / 2) +
           ")\">" + escape_xml(y_label) + "</text>\n";
    svg += "</g>\n";

    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
           "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#333333\"/>\n";

    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string pts;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i)
                pts += ' ';
            pts += num(px(c.time_s[i])) + "," + num(py(c.voltage_v[i] * 1000.0));
        }
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        if (c.size() <= 64) {  // markers so sparse records stay visible
            for (std::size_t i = 0; i < c.size(); ++i)
                svg += "<circle cx=\"" + num(px(c.time_s[i])) + "\" cy=\"" +
                       num(py(c.voltage_v[i] * 1000.0)) + "\" r=\"2.5\" fill=\"" + color +
                       "\"/>\n";
        }
    }

    // legend, top-right corner of the plot area
    svg += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const double ly = kTop + 16 + 18 * static_cast<double>(ci);
        const std::string label = curves[ci].meta.label
                                      ? *curves[ci].meta.label
                                      : "curve " + std::to_string(ci + 1);
        svg += "<line x1=\"" + num(kLeft + pw - 150) + "\" y1=\"" + num(ly - 4) +
               "\" x2=\"" + num(kLeft + pw - 126) + "\" y2=\"" + num(ly - 4) +
               "\" stroke=\"" + color + "\" stroke-width=\"3\"/>\n";
        svg += "<text x=\"" + num(kLeft + pw - 120) + "\" y=\"" + num(ly) + "\">" +
               escape_xml(label) + "</text>\n";
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

} // namespace nimh
