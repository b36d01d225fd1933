#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nimh {

enum class LoadUnit { MilliWatt, MilliAmp };

// One program step: hold `level` for `duration_ms`. Level 0 is idle; levels
// 1..255 are load intensities in the program's unit.
struct LoadStep {
    std::uint32_t duration_ms = 0;  // > 0
    std::uint8_t level = 0;
};

// Periodic pulse program with millisecond resolution. The step list is one
// cycle; it repeats forever.
struct LoadProgram {
    LoadUnit unit = LoadUnit::MilliAmp;
    std::vector<LoadStep> steps;

    // Cycle length in ms (sum of step durations).
    std::uint64_t cycle_ms() const;

    // Level at absolute time t_ms, wrapping by whole cycles. Steps are
    // half-open: a step owns [start, start + duration).
    std::uint8_t level_at(std::uint64_t t_ms) const;
};

// Throws DomainError unless the program has at least one step and every step
// has a positive duration.
void validate_program(const LoadProgram& prog);

struct CycleStats {
    std::uint64_t period_ms = 0;
    double duty = 0.0;        // fraction of the cycle with level > 0
    double mean_level = 0.0;  // per-ms average level over one cycle
    std::uint8_t peak_level = 0;
};

CycleStats cycle_stats(const LoadProgram& prog);

// Text format: first line `unit mw` or `unit ma`, then one
// `step <duration_ms> <level>` line per step. `#` starts a comment; blank
// lines are ignored; CRLF input is accepted.
LoadProgram parse_program_text(const std::string& text);
std::string serialize_program(const LoadProgram& prog);

} // namespace nimh
