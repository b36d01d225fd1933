#include "nimh/charge_detector.hpp"

#include <bit>
#include <cmath>

#include "nimh/errors.hpp"
#include "text_util.hpp"

namespace nimh {

namespace {

std::uint64_t window_mask(unsigned bits) {
    return bits >= 64 ? ~0ull : (1ull << bits) - 1ull;
}

} // namespace

void validate_detector_config(const DetectorConfig& cfg) {
    if (cfg.window_bits < 1 || cfg.window_bits > 64)
        throw DomainError("detector window_bits must be 1..64");
    if (cfg.ones_required < 1 || cfg.ones_required > cfg.window_bits)
        throw DomainError("detector ones_required must be 1..window_bits");
    if (cfg.avg_len < 1)
        throw DomainError("detector avg_len must be at least 1");
    if (!(cfg.sample_period_s > 0.0))
        throw DomainError("detector sample period must be positive");
    if (!(cfg.idle_after_s >= 0.0))
        throw DomainError("detector idle time must be non-negative");
    if (!std::isfinite(cfg.gate_mv))
        throw DomainError("detector gate voltage must be finite");
}

DetectorConfig parse_detector_config(const std::string& text) {
    DetectorConfig cfg;
    std::size_t lineno = 0;
    for (std::string_view raw : detail::split_lines(text)) {
        ++lineno;
        std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("expected key=value", lineno);
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view val = detail::trim(line.substr(eq + 1));

        auto as_unsigned = [&](unsigned& out) {
            std::uint32_t u = 0;
            if (!detail::parse_number(val, u))
                throw ParseError("bad unsigned value for '" + std::string(key) + "'", lineno);
            out = u;
        };
        auto as_double = [&](double& out) {
            double d = 0.0;
            if (!detail::parse_number(val, d))
                throw ParseError("bad numeric value for '" + std::string(key) + "'", lineno);
            out = d;
        };

        if (key == "gate_mv")
            as_double(cfg.gate_mv);
        else if (key == "window_bits")
            as_unsigned(cfg.window_bits);
        else if (key == "ones_required")
            as_unsigned(cfg.ones_required);
        else if (key == "avg_len")
            as_unsigned(cfg.avg_len);
        else if (key == "sample_period")
            as_double(cfg.sample_period_s);
        else if (key == "idle_after")
            as_double(cfg.idle_after_s);
        else
            throw ParseError("unknown detector key '" + std::string(key) + "'", lineno);
    }
    validate_detector_config(cfg);
    return cfg;
}

std::string serialize_detector_config(const DetectorConfig& cfg) {
    std::string out;
    out += "gate_mv=" + detail::fmt_full(cfg.gate_mv) + "\n";
    out += "window_bits=" + std::to_string(cfg.window_bits) + "\n";
    out += "ones_required=" + std::to_string(cfg.ones_required) + "\n";
    out += "avg_len=" + std::to_string(cfg.avg_len) + "\n";
    out += "sample_period=" + detail::fmt_full(cfg.sample_period_s) + "\n";
    out += "idle_after=" + detail::fmt_full(cfg.idle_after_s) + "\n";
    return out;
}

bool window_full_vote(const DetectorState& state, const DetectorConfig& cfg) {
    if (state.filled < cfg.window_bits)
        return false;
    const auto ones =
        static_cast<unsigned>(std::popcount(state.window & window_mask(cfg.window_bits)));
    return ones >= cfg.ones_required;
}

DetectorDecision detector_step(DetectorState& state, double avg_mv,
                               const DetectorConfig& cfg) {
    validate_detector_config(cfg);
    if (!std::isfinite(avg_mv))
        throw DomainError("detector_step: decision sample must be finite");

    if (!state.gate_passed) {
        if (avg_mv >= cfg.gate_mv) {
            state.gate_passed = true;
            state.prev_avg_mv = avg_mv;  // baseline only, no bit yet
        }
        return DetectorDecision::KeepCharging;
    }

    const bool falling = state.prev_avg_mv && avg_mv < *state.prev_avg_mv;
    state.prev_avg_mv = avg_mv;
    state.window = ((state.window << 1) | (falling ? 1ull : 0ull)) & window_mask(cfg.window_bits);
    if (state.filled < cfg.window_bits)
        ++state.filled;

    return window_full_vote(state, cfg) ? DetectorDecision::Terminate
                                        : DetectorDecision::KeepCharging;
}

DetectionResult run_detector(const DischargeCurve& curve, const DetectorConfig& cfg) {
    validate_detector_config(cfg);
    validate_curve(curve);
    const std::size_t n = curve.size();
    if (n < cfg.avg_len)
        throw DomainError("run_detector: fewer raw samples than one decision block");

    DetectorState state;
    DetectionResult res;
    for (std::size_t block = 0; (block + 1) * cfg.avg_len <= n; ++block) {
        const std::size_t i0 = block * cfg.avg_len;
        double acc = 0.0;
        for (std::size_t i = 0; i < cfg.avg_len; ++i)
            acc += curve.voltage_v[i0 + i];
        const double avg_mv = acc / static_cast<double>(cfg.avg_len) * 1000.0;
        const double t_decision = curve.time_s[i0 + cfg.avg_len - 1];
        if (detector_step(state, avg_mv, cfg) == DetectorDecision::Terminate) {
            res.t_terminate_s = t_decision;
            res.t_resume_s = t_decision + cfg.idle_after_s;
            break;
        }
    }
    return res;
}

} // namespace nimh
