#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nimh/curve.hpp"
#include "nimh/load_program.hpp"
#include "nimh/model.hpp"

namespace nimh {

// y = slope * x + intercept, ordinary least squares.
struct LinCoef {
    double slope = 0.0;
    double intercept = 0.0;
};

// Requires at least 2 distinct x values.
LinCoef fit_linear(std::span<const double> x, std::span<const double> y);

// y = mag / (shift + x) + offset with the pole -shift outside the fitted
// x-range (shift + x > 0 for every data point).
struct HypCoef {
    double mag = 0.0;
    double shift = 0.0;
    double offset = 0.0;
};

struct HypFit {
    HypCoef coef;
    double rmse = 0.0;
    bool converged = false;
};

// Grid-seeded (shift candidates + linear solve for mag/offset) then polished
// by damped least squares. Requires at least 3 distinct x values.
HypFit fit_hyperbolic(std::span<const double> x, std::span<const double> y);

struct FitResult {
    ModelParams params;
    double rmse = 0.0;       // V
    int iterations = 0;
    bool converged = false;  // false after divergence or iteration cap
};

// Fits the six-parameter discharge model to a sampled curve by damped
// (Levenberg-Marquardt) least squares with analytic Jacobians. When init is
// absent a heuristic initial guess is derived from the curve itself. Pole
// placement (start_shift > 0, drop_shift beyond the last sample) is enforced
// by rejecting steps that leave the region. Divergence is reported via
// converged = false, never an exception. Requires at least 12 samples with
// non-negative times.
FitResult fit_discharge_curve(const DischargeCurve& curve,
                              const std::optional<ModelParams>& init = std::nullopt);

// Per-cycle envelope extraction from a pulsed discharge record. For every
// whole program cycle covered by the curve the upper point is the sample at
// the last instant of the cycle's final idle span and the lower point is the
// sample at the last instant of its final loaded span. A trailing partial
// cycle is ignored; it is an error when not even one whole cycle fits, when
// a needed span holds no sample, or when the program never idles / never
// loads.
struct EnvelopePair {
    DischargeCurve upper;
    DischargeCurve lower;
};

EnvelopePair extract_envelopes(const DischargeCurve& curve, const LoadProgram& prog);

} // namespace nimh
