#pragma once

#include <cstdint>
#include <optional>

#include "nimh/curve.hpp"
#include "nimh/load_program.hpp"
#include "nimh/model.hpp"

namespace nimh {

// Internal series resistance as a function of discharged fraction x in [0,1]:
// flat at r0_ohm until knee_x, then linear up to r_end_ohm at x = 1. Outside
// [0,1] the nearest end value applies.
struct InternalResistanceModel {
    double r0_ohm = 0.100;
    double r_end_ohm = 0.300;
    double knee_x = 0.95;

    double at(double x) const {
        if (x <= knee_x)
            return r0_ohm;
        if (x >= 1.0)
            return r_end_ohm;
        return r0_ohm + (r_end_ohm - r0_ohm) * (x - knee_x) / (1.0 - knee_x);
    }
};

// Generator description for pulsed operation: open-circuit-ish upper curve,
// loaded lower curve, IR step, and first-order relaxation time constants for
// switch-on sag and switch-off recovery.
struct EnvelopeModel {
    ModelParams upper;
    ModelParams lower;
    InternalResistanceModel r_int;
    double kappa_on_s = 5.0;
    double kappa_off_s = 5.0;
};

// Optional rest tail appended after the cutoff sample: the voltage relaxes
// from the cutoff value toward rest_v with the saturating ramp tau/(tau+kappa).
struct RecoveryOptions {
    double rest_v = 1.2;       // V
    double duration_s = 600.0;
    double kappa_s = 60.0;
};

// Samples eval_model at t = 0, dt, 2*dt, ... and stops with the first sample
// at or below v_cutoff (that sample is included). load_ma, when given, fills
// the current column and the meta. Throws DomainError when the cutoff is
// never reached.
DischargeCurve simulate_constant(const ModelParams& params, double dt_s, double v_cutoff,
                                 std::optional<double> load_ma = std::nullopt,
                                 const std::optional<RecoveryOptions>& recovery = std::nullopt);

// Pulsed-load terminal voltage. While loaded the voltage sags from the upper
// curve toward the lower one plus the IR step with time constant kappa_on_s;
// while idle it recovers from the switch-off voltage toward the upper curve
// with kappa_off_s. Before the first loaded span the output follows the upper
// curve exactly. Milliwatt programs convert level to current with the
// previous sample's voltage. Stops with the first sample at or below
// v_cutoff. dt_s must not exceed the shortest program step.
DischargeCurve simulate_pulsing(const EnvelopeModel& env, const LoadProgram& prog,
                                double dt_s, double v_cutoff);

// Constant-current charge terminal voltage: an accelerating rise from
// v_start to the peak (knee_sharpness bends the exponential ramp; 0 means
// linear) followed by a straight decline. charge_ma only fills the current
// column.
struct ChargeProfile {
    double v_start = 1.5;                  // V
    double v_peak = 1.7;                   // V
    double t_peak_s = 3600.0;
    double decline_v_per_s = 0.002 / 60.0; // 2 mV/min past the peak
    double knee_sharpness = 6.0;
    double charge_ma = 500.0;
};

DischargeCurve simulate_charge(const ChargeProfile& profile, double dt_s, double t_total_s);

// Adds i.i.d. Gaussian noise to the voltage column. The generator is seeded
// deterministically and the transform is fixed, so one (curve, sigma, seed)
// triple yields bit-identical output everywhere.
DischargeCurve add_noise(const DischargeCurve& curve, double sigma_v, std::uint64_t seed);

// Canonical single-cell discharge shape rescaled in time so that the 0.9 V
// crossing lands at 94% of the ideal capacity_mah/load_ma runtime (the
// usable fraction of nominal capacity at that cutoff).
ModelParams reference_discharge_params(double capacity_mah, double load_ma);

} // namespace nimh
