#pragma once

#include <string>
#include <vector>

#include "nimh/curve.hpp"

namespace nimh {

// Renders curves into one standalone SVG document: framed plot area, light
// grid on rounded tick values, a colored polyline per curve (plus sample
// markers for short records), legend from the curve labels. Voltages are
// scaled to mV to match the default axis caption. Output depends only on the
// input, byte for byte.
std::string render_svg(const std::vector<DischargeCurve>& curves,
                       const std::string& x_label = "time [s]",
                       const std::string& y_label = "voltage [mV]");

} // namespace nimh
