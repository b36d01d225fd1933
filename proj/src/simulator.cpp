#include "nimh/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "nimh/errors.hpp"

namespace nimh {

DischargeCurve simulate_constant(const ModelParams& params, double dt_s, double v_cutoff,
                                 std::optional<double> load_ma,
                                 const std::optional<RecoveryOptions>& recovery) {
    if (!(dt_s > 0.0))
        throw DomainError("simulate_constant: dt must be positive");
    const double t_cross = time_to_cutoff(params, v_cutoff);  // also checks reachability

    DischargeCurve out;
    if (load_ma) {
        if (!(*load_ma >= 0.0))
            throw DomainError("simulate_constant: load must be non-negative");
        out.meta.load_ma = *load_ma;
    }

    std::uint64_t k = 0;
    for (;; ++k) {
        const double t = static_cast<double>(k) * dt_s;
        // The crossing sample lands within one step of the bisection result;
        // anything beyond that means the model is not behaving.
        if (t > t_cross + 2.0 * dt_s + 1.0)
            throw DomainError("simulate_constant: cutoff sample not reached near the crossing");
        const double v = eval_model(params, t);
        out.time_s.push_back(t);
        out.voltage_v.push_back(v);
        if (load_ma)
            out.current_ma.push_back(*load_ma);
        if (v <= v_cutoff)
            break;
    }

    if (recovery) {
        const auto& rec = *recovery;
        if (!(rec.duration_s > 0.0) || !(rec.kappa_s >= 0.0))
            throw DomainError("simulate_constant: bad recovery options");
        const double t_b = out.time_s.back();
        const double v_b = out.voltage_v.back();
        for (std::uint64_t j = 1;; ++j) {
            const double tau = static_cast<double>(j) * dt_s;
            if (tau > rec.duration_s)
                break;
            const double s = tau + rec.kappa_s > 0.0 ? tau / (tau + rec.kappa_s) : 1.0;
            out.time_s.push_back(t_b + tau);
            out.voltage_v.push_back(v_b + (rec.rest_v - v_b) * s);
            if (load_ma)
                out.current_ma.push_back(0.0);  // load removed during rest
        }
    }
    return out;
}

namespace {

struct CycleSpan {
    bool on;
    std::uint64_t a_ms, b_ms;  // cycle-relative, [a, b)
};

std::vector<CycleSpan> merged_spans(const LoadProgram& prog) {
    std::vector<CycleSpan> spans;
    std::uint64_t pos = 0;
    for (const auto& s : prog.steps) {
        const bool on = s.level > 0;
        if (!spans.empty() && spans.back().on == on)
            spans.back().b_ms += s.duration_ms;
        else
            spans.push_back({on, pos, pos + s.duration_ms});
        pos += s.duration_ms;
    }
    return spans;
}

// Walks maximal constant-state runs across cycle repetitions. With a single
// merged span the program never changes state and the run is unbounded.
class RunWalker {
public:
    RunWalker(std::vector<CycleSpan> spans, std::uint64_t period_ms)
        : spans_(std::move(spans)), period_(period_ms) {
        wrap_merge_ = spans_.size() > 1 && spans_.front().on == spans_.back().on;
        load(0, 0);
    }

    bool on() const { return on_; }
    double start_s() const { return static_cast<double>(start_ms_) / 1000.0; }
    std::uint64_t end_ms() const { return end_ms_; }  // UINT64_MAX when unbounded

    void advance() {
        if (spans_.size() == 1)
            throw DomainError("RunWalker: advancing past an unbounded run");
        if (wrap_merge_ && idx_ == spans_.size() - 1)
            load(cycle_ + 1, 1);
        else if (idx_ + 1 == spans_.size())
            load(cycle_ + 1, 0);
        else
            load(cycle_, idx_ + 1);
    }

private:
    void load(std::uint64_t cycle, std::size_t idx) {
        cycle_ = cycle;
        idx_ = idx;
        on_ = spans_[idx].on;
        start_ms_ = cycle * period_ + spans_[idx].a_ms;
        if (spans_.size() == 1) {
            end_ms_ = std::numeric_limits<std::uint64_t>::max();
        } else if (wrap_merge_ && idx == spans_.size() - 1) {
            end_ms_ = (cycle + 1) * period_ + spans_.front().b_ms;
        } else {
            end_ms_ = cycle * period_ + spans_[idx].b_ms;
        }
    }

    std::vector<CycleSpan> spans_;
    std::uint64_t period_;
    bool wrap_merge_ = false;
    std::uint64_t cycle_ = 0;
    std::size_t idx_ = 0;
    bool on_ = false;
    std::uint64_t start_ms_ = 0;
    std::uint64_t end_ms_ = 0;
};

double saturating_ramp(double tau, double kappa) {
    return tau + kappa > 0.0 ? tau / (tau + kappa) : 1.0;
}

} // namespace

DischargeCurve simulate_pulsing(const EnvelopeModel& env, const LoadProgram& prog,
                                double dt_s, double v_cutoff) {
    validate_program(prog);
    if (!(dt_s > 0.0))
        throw DomainError("simulate_pulsing: dt must be positive");
    if (!(env.kappa_on_s >= 0.0) || !(env.kappa_off_s >= 0.0))
        throw DomainError("simulate_pulsing: relaxation constants must be non-negative");

    std::uint32_t min_step = std::numeric_limits<std::uint32_t>::max();
    for (const auto& s : prog.steps)
        min_step = std::min(min_step, s.duration_ms);
    if (dt_s * 1000.0 > static_cast<double>(min_step) + 1e-9)
        throw DomainError("simulate_pulsing: dt coarser than the shortest program step");

    const double t_life_upper = time_to_cutoff(env.upper, v_cutoff);
    double t_life = t_life_upper;  // x-axis scale for the resistance ramp
    try {
        t_life = time_to_cutoff(env.lower, v_cutoff);
    } catch (const DomainError&) {
        // lower curve never crosses (light-load shapes); keep the upper life
    }

    // Hard stop: the voltage trails the upper curve, so the crossing must
    // appear within a relaxation horizon of the upper curve's own crossing,
    // and the model must never be evaluated past a pole.
    double t_cap = t_life_upper + static_cast<double>(prog.cycle_ms()) / 1000.0 +
                   200.0 * std::max({env.kappa_on_s, env.kappa_off_s, dt_s});
    for (const ModelParams* p : {&env.upper, &env.lower}) {
        if (p->drop_mag != 0.0 && p->drop_shift < 0.0)
            t_cap = std::min(t_cap, -p->drop_shift * 0.9999);
    }

    RunWalker walker(merged_spans(prog), prog.cycle_ms());
    bool seen_on = walker.on();
    double v_prev = eval_model(env.upper, 0.0);
    double v_switch = v_prev;

    const bool milliwatt = prog.unit == LoadUnit::MilliWatt;
    auto current_ma_for = [&](std::uint8_t level) {
        if (!milliwatt)
            return static_cast<double>(level);
        if (!(v_prev > 1e-6))
            throw DomainError("simulate_pulsing: voltage collapsed; milliwatt load undefined");
        return static_cast<double>(level) / v_prev;  // mW / V = mA
    };

    auto loaded_voltage = [&](double t, double run_start_s, double i_ma) {
        const double upper = eval_model(env.upper, t);
        const double lower = eval_model(env.lower, t);
        if (upper + 1e-12 < lower)
            throw DomainError("simulate_pulsing: upper envelope below lower at t = " +
                              std::to_string(t));
        const double i_r = i_ma / 1000.0 * env.r_int.at(t / t_life);
        const double gap = upper - lower - i_r;
        return upper - gap * saturating_ramp(t - run_start_s, env.kappa_on_s) - i_r;
    };

    DischargeCurve out;
    const CycleStats st = cycle_stats(prog);
    out.meta.period_s = static_cast<double>(st.period_ms) / 1000.0;
    out.meta.duty = st.duty;

    for (std::uint64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt_s;
        if (t > t_cap)
            throw DomainError("simulate_pulsing: cutoff voltage not reached");
        const auto ms = static_cast<std::uint64_t>(std::floor(t * 1000.0 + 1e-6));

        while (ms >= walker.end_ms()) {
            if (walker.on()) {
                // leaving a loaded run: freeze the hand-off voltage at the
                // exact switch instant
                const double t_sw = static_cast<double>(walker.end_ms()) / 1000.0;
                const double i_sw = current_ma_for(prog.level_at(walker.end_ms() - 1));
                v_switch = loaded_voltage(t_sw, walker.start_s(), i_sw);
            }
            walker.advance();
            if (walker.on())
                seen_on = true;
        }

        double v;
        double i_ma = 0.0;
        if (walker.on()) {
            i_ma = current_ma_for(prog.level_at(ms));
            v = loaded_voltage(t, walker.start_s(), i_ma);
        } else if (!seen_on) {
            v = eval_model(env.upper, t);  // untouched cell at rest
        } else {
            const double upper = eval_model(env.upper, t);
            const double s = saturating_ramp(t - walker.start_s(), env.kappa_off_s);
            v = v_switch + (upper - v_switch) * s;
        }

        out.time_s.push_back(t);
        out.voltage_v.push_back(v);
        out.current_ma.push_back(i_ma);
        v_prev = v;
        if (v <= v_cutoff)
            break;
    }
    return out;
}

DischargeCurve simulate_charge(const ChargeProfile& profile, double dt_s, double t_total_s) {
    if (!(dt_s > 0.0))
        throw DomainError("simulate_charge: dt must be positive");
    if (!(t_total_s > 0.0))
        throw DomainError("simulate_charge: total time must be positive");
    if (!(profile.t_peak_s > 0.0))
        throw DomainError("simulate_charge: peak time must be positive");
    if (!(profile.v_peak > profile.v_start))
        throw DomainError("simulate_charge: peak voltage must exceed the start voltage");
    if (!(profile.decline_v_per_s >= 0.0) || !(profile.knee_sharpness >= 0.0))
        throw DomainError("simulate_charge: decline and knee sharpness must be non-negative");

    const double k = profile.knee_sharpness;
    const double denom = k > 0.0 ? std::expm1(k) : 1.0;

    DischargeCurve out;
    out.meta.label = "charge";
    for (std::uint64_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * dt_s;
        if (t > t_total_s)
            break;
        double v;
        if (t <= profile.t_peak_s) {
            const double u = t / profile.t_peak_s;
            const double g = k > 0.0 ? std::expm1(k * u) / denom : u;
            v = profile.v_start + (profile.v_peak - profile.v_start) * g;
        } else {
            v = profile.v_peak - profile.decline_v_per_s * (t - profile.t_peak_s);
        }
        out.time_s.push_back(t);
        out.voltage_v.push_back(std::max(v, 0.0));
        out.current_ma.push_back(profile.charge_ma);
    }
    return out;
}

DischargeCurve add_noise(const DischargeCurve& curve, double sigma_v, std::uint64_t seed) {
    validate_curve(curve);
    if (!(sigma_v >= 0.0))
        throw DomainError("add_noise: sigma must be non-negative");
    DischargeCurve out = curve;
    if (sigma_v == 0.0)
        return out;

    // Box-Muller over a fixed-output engine; std::normal_distribution is
    // implementation-defined and would break cross-platform reproducibility.
    std::mt19937_64 rng(seed);
    auto uniform01 = [&rng] {
        return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    };
    bool cached = false;
    double spare = 0.0;
    auto gaussian = [&] {
        if (cached) {
            cached = false;
            return spare;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform01()));
        const double th = 2.0 * std::numbers::pi * uniform01();
        spare = r * std::sin(th);
        cached = true;
        return r * std::cos(th);
    };

    for (auto& v : out.voltage_v)
        v = std::max(0.0, v + sigma_v * gaussian());
    return out;
}

ModelParams reference_discharge_params(double capacity_mah, double load_ma) {
    if (!(capacity_mah > 0.0))
        throw DomainError("reference_discharge_params: capacity must be positive");
    if (!(load_ma > 0.0))
        throw DomainError("reference_discharge_params: load must be positive");

    // Canonical cell shape; rescaling time by s maps the two poles and the
    // linear term while leaving the voltage landmarks untouched.
    const ModelParams base{6.0, 60.0, 60.0, -6000.0, -1e-5, 1.25};
    const double t_base = time_to_cutoff(base, 0.9);

    constexpr double kUsableFraction = 0.94;  // share of nominal Ah delivered by 0.9 V
    const double t_target = kUsableFraction * (capacity_mah / load_ma) * 3600.0;
    const double s = t_target / t_base;

    ModelParams p;
    p.start_mag = base.start_mag * s;
    p.start_shift = base.start_shift * s;
    p.drop_mag = base.drop_mag * s;
    p.drop_shift = base.drop_shift * s;
    p.slope = base.slope / s;
    p.offset = base.offset;
    return p;
}

} // namespace nimh
