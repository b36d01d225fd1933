#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nimh {

// Optional annotations carried alongside a sampled curve. Everything here is
// descriptive only; no algorithm depends on it except where a function takes
// the value explicitly.
struct CurveMeta {
    std::optional<std::string> label;
    std::optional<double> load_ma;    // constant-load current, mA
    std::optional<double> period_s;   // pulse period for pulsed curves
    std::optional<double> duty;       // pulse duty cycle, 0..1
    std::optional<double> temp_c;     // ambient temperature, Celsius
};

// Sampled terminal-voltage record, columnar. time_s is strictly increasing,
// voltage_v holds volts, current_ma is either empty or one entry per sample.
struct DischargeCurve {
    std::vector<double> time_s;
    std::vector<double> voltage_v;
    std::vector<double> current_ma;   // may be empty
    CurveMeta meta;

    std::size_t size() const noexcept { return time_s.size(); }
    bool has_current() const noexcept { return !current_ma.empty(); }
};

// Throws DomainError unless: sizes consistent, at least one sample, time
// strictly increasing, every voltage finite and non-negative, every current
// (if present) finite.
void validate_curve(const DischargeCurve& curve);

} // namespace nimh
