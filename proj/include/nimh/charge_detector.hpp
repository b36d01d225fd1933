#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nimh/curve.hpp"

namespace nimh {

// Negative-delta-V end-of-charge detector. Raw voltage samples taken every
// sample_period_s are averaged in blocks of avg_len into decision samples.
// Decisions are armed only after a decision sample reaches gate_mv. From then
// on each decision sample is compared with its predecessor and one bit
// (1 = strictly decreasing) is shifted into a window_bits-wide register;
// charging terminates once the register is full and holds at least
// ones_required ones. After termination the charger idles idle_after_s.
struct DetectorConfig {
    double gate_mv = 1600.0;
    unsigned window_bits = 16;    // 1..64
    unsigned ones_required = 12;  // 1..window_bits
    unsigned avg_len = 16;        // raw samples per decision sample
    double sample_period_s = 15.0;
    double idle_after_s = 1800.0;
};

void validate_detector_config(const DetectorConfig& cfg);

// key=value text, one per line, `#` comments; keys mirror the DetectorConfig
// fields (gate_mv, window_bits, ones_required, avg_len, sample_period,
// idle_after). Missing keys keep their defaults; unknown keys are rejected.
DetectorConfig parse_detector_config(const std::string& text);
std::string serialize_detector_config(const DetectorConfig& cfg);

// The register holds only comparison bits produced after the gate passed;
// bit 0 is the newest. filled counts bits shifted so far.
struct DetectorState {
    bool gate_passed = false;
    std::optional<double> prev_avg_mv;
    std::uint64_t window = 0;
    unsigned filled = 0;
};

enum class DetectorDecision { KeepCharging, Terminate };

// Feeds one decision sample (already averaged, in mV). The gate-passing
// sample only records the comparison baseline; bits start with the next
// sample. Termination requires filled >= window_bits and a popcount of at
// least ones_required.
DetectorDecision detector_step(DetectorState& state, double avg_mv,
                               const DetectorConfig& cfg);

// Equivalent phrasing of the vote: at most window_bits - ones_required zero
// bits in a full register.
bool window_full_vote(const DetectorState& state, const DetectorConfig& cfg);

struct DetectionResult {
    std::optional<double> t_terminate_s;  // time of the terminating decision sample
    std::optional<double> t_resume_s;     // t_terminate_s + idle_after_s
};

// Runs the detector over a raw sampled charge curve: consecutive blocks of
// avg_len raw samples form decision samples (block mean, timestamped at the
// block's last sample). A trailing short block is ignored. Requires at least
// one full block.
DetectionResult run_detector(const DischargeCurve& curve, const DetectorConfig& cfg);

} // namespace nimh
