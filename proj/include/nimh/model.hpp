#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nimh/curve.hpp"

namespace nimh {

// Discharge-voltage approximation: a fast initial transient, a steep
// end-of-life drop, and a slow linear decline in between,
//
//   v(t) = start_mag / (start_shift + t)
//        + drop_mag  / (drop_shift  + t)
//        + slope * t + offset
//
// with t in seconds and v in volts. For a physically sensible discharge the
// first pole sits before t = 0 (start_shift > 0) and the second past the end
// of the usable life (drop_shift < 0, |drop_shift| > t_end). In parameter
// files the six fields map, in this order, to the keys A..F.
struct ModelParams {
    double start_mag   = 0.0;  // V*s, initial-transient numerator
    double start_shift = 0.0;  // s,   initial-transient pole offset
    double drop_mag    = 0.0;  // V*s, end-of-life numerator
    double drop_shift  = 0.0;  // s,   end-of-life pole offset (negative)
    double slope       = 0.0;  // V/s, linear decline
    double offset      = 0.0;  // V,   plateau level
};

// Parameter-file key order; index i names the i-th ModelParams field.
inline constexpr std::array<const char*, 6> kParamKeys{"A", "B", "C", "D", "E", "F"};

double param_value(const ModelParams& p, std::size_t index);
double& param_ref(ModelParams& p, std::size_t index);

// Evaluates the model at t_s. A hyperbolic term with zero numerator is
// skipped entirely, so zeroed parameter sets degrade to the simpler shapes.
// Throws DomainError when t_s lands on a remaining pole.
double eval_model(const ModelParams& params, double t_s);

struct ValidityReport {
    bool valid = true;
    std::vector<std::string> violations;  // empty iff valid
};

// Checks the pole-placement rules against an intended evaluation window
// [0, t_end_s] and probes the model for non-finite output on that window.
// Always returns a report; throws only for t_end_s <= 0.
ValidityReport validate_params(const ModelParams& params, double t_end_s);

// Smallest t >= 0 with v(t) == v_cutoff, located by a 64-point bracket scan
// followed by bisection. The result satisfies |v(t) - v_cutoff| <= 1e-6 V and
// the final bracket is at most 1e-3 s wide. Preconditions: v(0) > v_cutoff
// and the curve actually crosses; otherwise DomainError.
double time_to_cutoff(const ModelParams& params, double v_cutoff);

// Discharge phase boundaries recovered from a sampled curve:
// initial transient end, plateau end, cutoff knee, and (when the tail rises
// again after the minimum) the end of the recovery tail. degenerate marks
// curves where a threshold never crossed and a boundary was pinned to the
// nearest sample instead.
struct PhaseBoundaries {
    double t_init_end = 0.0;
    double t_hold_end = 0.0;
    double t_cutoff   = 0.0;
    std::optional<double> t_recovery_end;
    bool degenerate = false;
};

// Slope-threshold segmentation. Discrete slopes are smoothed with a centered
// 9-sample moving average; thresholds are 3x (transient settled) and 10x
// (drop begins) the median smoothed slope magnitude over the middle half of
// the record. Requires at least 16 samples. Throws DomainError when the
// thresholds produce out-of-order boundaries.
PhaseBoundaries segment_phases(const DischargeCurve& curve);

} // namespace nimh
