#pragma once

#include "nimh/curve.hpp"

namespace nimh {

struct CapacityReport {
    double charge_mah = 0.0;   // trapezoidal integral of the current column
    double duration_s = 0.0;   // last sample time
    bool cutoff_reached = false;
};

// Integrates the current column over time (trapezoids). Requires a current
// column and at least 2 samples. cutoff_reached reflects the final voltage
// against v_cutoff.
CapacityReport integrate_capacity(const DischargeCurve& curve, double v_cutoff);

// dV/dt in V/s via centered differences (one-sided at the ends), then a
// centered moving average of `window` samples (odd, >= 1; truncated at the
// record ends). The result reuses the curve layout with the derivative in
// the voltage column; it is not a voltage record and may well be negative.
DischargeCurve derivative_curve(const DischargeCurve& curve, std::size_t window = 1);

} // namespace nimh
