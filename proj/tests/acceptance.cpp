// Acceptance harness: nine release criteria, one PASS/FAIL line each.
// Runs standalone (no test framework); exit code 0 only when all pass.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "nimh/analysis.hpp"
#include "nimh/charge_detector.hpp"
#include "nimh/dependence.hpp"
#include "nimh/errors.hpp"
#include "nimh/fitting.hpp"
#include "nimh/load_program.hpp"
#include "nimh/model.hpp"
#include "nimh/simulator.hpp"

using namespace nimh;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

const ModelParams kCanonical{6.0, 60.0, 60.0, -6000.0, -1e-5, 1.25};

// ---------------------------------------------------------------- criterion 1
// 50 random valid parameter sets, simulated at 1 s steps: the refit must
// reproduce each curve to 1e-4 V pointwise noiseless and 3 mV RMSE under
// 2 mV noise, all within a 60 s budget.
Outcome round_trip_fitting() {
    testutil::Rng rng(0xacce0701u);
    const auto t0 = std::chrono::steady_clock::now();

    double worst_point = 0.0, worst_rmse = 0.0;
    int bad = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const ModelParams p = testutil::random_params(rng);
        const DischargeCurve clean = simulate_constant(p, 1.0, 0.9);

        const FitResult noiseless = fit_discharge_curve(clean);
        double point = 0.0;
        if (!noiseless.converged) {
            ++bad;
        } else {
            for (std::size_t i = 0; i < clean.size(); ++i)
                point = std::max(point, std::abs(eval_model(noiseless.params, clean.time_s[i]) -
                                                 clean.voltage_v[i]));
            worst_point = std::max(worst_point, point);
            if (point > 1e-4)
                ++bad;
        }

        const DischargeCurve noisy =
            add_noise(clean, 2e-3, 0x9000u + static_cast<std::uint64_t>(trial));
        const FitResult under_noise = fit_discharge_curve(noisy);
        if (!under_noise.converged) {
            ++bad;
        } else {
            double sse = 0.0;
            for (std::size_t i = 0; i < clean.size(); ++i) {
                const double e =
                    eval_model(under_noise.params, clean.time_s[i]) - clean.voltage_v[i];
                sse += e * e;
            }
            const double rmse = std::sqrt(sse / static_cast<double>(clean.size()));
            worst_rmse = std::max(worst_rmse, rmse);
            if (rmse > 3e-3)
                ++bad;
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Outcome out;
    out.pass = bad == 0 && secs <= 60.0;
    out.detail = "worst pointwise " + fmt("%.2e", worst_point) + " V, worst noisy rmse " +
                 fmt("%.2e", worst_rmse) + " V, " + fmt("%.1f", secs) + " s, " +
                 std::to_string(bad) + " violations";
    return out;
}

// ---------------------------------------------------------------- criterion 2
// The cutoff solver lands on the 0.9 V crossing to 1e-6 V on the same
// parameter family; the canonical set crosses near 5795 s.
Outcome cutoff_consistency() {
    testutil::Rng rng(0xacce0701u);  // same family as criterion 1
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const ModelParams p = testutil::random_params(rng);
        const double t_cross = time_to_cutoff(p, 0.9);
        worst = std::max(worst, std::abs(eval_model(p, t_cross) - 0.9));
    }
    const double canon = time_to_cutoff(kCanonical, 0.9);

    Outcome out;
    out.pass = worst <= 1e-6 && std::abs(canon - 5795.0) <= 5.0;
    out.detail = "worst residual " + fmt("%.2e", worst) + " V, canonical crossing " +
                 fmt("%.1f", canon) + " s";
    return out;
}

// ---------------------------------------------------------------- criterion 3
// Exhaustive register enumeration against an independent popcount oracle;
// the ones-needed and zeros-allowed phrasings must agree on every state.
Outcome detector_window_oracle() {
    const DetectorConfig cfg;  // 16-bit window, 12 ones
    std::uint64_t mismatches = 0;
    for (std::uint32_t pattern = 0; pattern < (1u << 16); ++pattern) {
        unsigned ones = 0;
        for (unsigned b = 0; b < 16; ++b)
            ones += (pattern >> b) & 1u;

        DetectorState st;
        st.gate_passed = true;
        st.window = pattern;
        st.filled = 16;
        const bool vote = window_full_vote(st, cfg);
        if (vote != (ones >= 12))
            ++mismatches;
        if (vote != (16 - ones <= 4))
            ++mismatches;

        st.filled = 15;  // warmup states never vote
        if (window_full_vote(st, cfg))
            ++mismatches;
    }
    Outcome out;
    out.pass = mismatches == 0;
    out.detail = std::to_string(mismatches) + " mismatches over 65536 patterns";
    return out;
}

// ---------------------------------------------------------------- criterion 4
// Termination on a noisy synthetic charge curve: within 20 decision samples
// after the true peak, never below the gate or on the rise, on at least 99
// of 100 seeds.
Outcome charge_termination() {
    const DetectorConfig cfg;
    const ChargeProfile profile;  // peak at 3600 s, 2 mV/min decline
    const DischargeCurve clean = simulate_charge(profile, cfg.sample_period_s, 9000.0);
    const double decision_period = cfg.sample_period_s * static_cast<double>(cfg.avg_len);
    const double latest = profile.t_peak_s + 20.0 * decision_period;

    int successes = 0;
    int premature = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const DischargeCurve noisy = add_noise(clean, 1e-3, seed);
        const DetectionResult res = run_detector(noisy, cfg);
        if (!res.t_terminate_s)
            continue;
        if (*res.t_terminate_s <= profile.t_peak_s) {
            ++premature;  // fired during the monotone rise
            continue;
        }
        if (*res.t_terminate_s <= latest)
            ++successes;
    }
    Outcome out;
    out.pass = successes >= 99 && premature == 0;
    out.detail = std::to_string(successes) + "/100 in-window, " + std::to_string(premature) +
                 " premature";
    return out;
}

// ---------------------------------------------------------------- criterion 5
// Pulsed simulation at 360 s period, 50% duty, 250 mA: envelopes extracted
// from the trace refit to 2 mV RMSE, stay ordered, and land within 5 mV of
// the generating curves.
Outcome pulse_envelope_integrity() {
    LoadProgram prog;
    prog.unit = LoadUnit::MilliAmp;
    prog.steps = {{180000, 250}, {180000, 0}};

    EnvelopeModel env;
    env.upper = reference_discharge_params(850.0, 125.0);
    env.lower = env.upper;
    env.lower.offset -= 0.05;

    const DischargeCurve trace = simulate_pulsing(env, prog, 1.0, 0.9);
    const EnvelopePair pair = extract_envelopes(trace, prog);
    const FitResult up = fit_discharge_curve(pair.upper);
    const FitResult lo = fit_discharge_curve(pair.lower);

    double worst_model = 0.0, worst_order = 0.0;
    for (std::size_t i = 0; i < pair.upper.size(); ++i) {
        const double tu = pair.upper.time_s[i], tl = pair.lower.time_s[i];
        worst_model = std::max(
            worst_model, std::abs(eval_model(up.params, tu) - eval_model(env.upper, tu)));
        worst_model = std::max(
            worst_model, std::abs(eval_model(lo.params, tl) - eval_model(env.lower, tl)));
        worst_order =
            std::max(worst_order, eval_model(lo.params, tu) - eval_model(up.params, tu));
    }

    Outcome out;
    out.pass = up.converged && lo.converged && up.rmse <= 2e-3 && lo.rmse <= 2e-3 &&
               worst_order <= 0.0 && worst_model <= 5e-3;
    out.detail = "fit rmse " + fmt("%.2e", up.rmse) + "/" + fmt("%.2e", lo.rmse) +
                 " V, model gap " + fmt("%.2e", worst_model) + " V, " +
                 std::to_string(pair.upper.size()) + " cycles";
    return out;
}

// ---------------------------------------------------------------- criterion 6
// Integrated current over whole cycles equals the program's per-cycle charge
// to 0.1%; the 50%-duty 250 mA program averages exactly 125 mA.
Outcome charge_balance() {
    LoadProgram prog;
    prog.unit = LoadUnit::MilliAmp;
    prog.steps = {{180000, 250}, {180000, 0}};
    const CycleStats st = cycle_stats(prog);

    EnvelopeModel env;
    env.upper = reference_discharge_params(850.0, 125.0);
    env.lower = env.upper;
    env.lower.offset -= 0.05;
    const DischargeCurve trace = simulate_pulsing(env, prog, 1.0, 0.9);

    const double period_s = static_cast<double>(st.period_ms) / 1000.0;
    const auto cycles =
        static_cast<std::size_t>(std::floor(trace.time_s.back() / period_s));
    DischargeCurve head;
    for (std::size_t i = 0; i < trace.size() && trace.time_s[i] <= period_s * cycles + 1e-9;
         ++i) {
        head.time_s.push_back(trace.time_s[i]);
        head.voltage_v.push_back(trace.voltage_v[i]);
        head.current_ma.push_back(trace.current_ma[i]);
    }
    const CapacityReport rep = integrate_capacity(head, 0.9);
    const double expected_mah =
        st.mean_level * period_s * static_cast<double>(cycles) / 3600.0;
    const double rel = std::abs(rep.charge_mah - expected_mah) / expected_mah;

    Outcome out;
    out.pass = st.mean_level == 125.0 && rel <= 1e-3;
    out.detail = "mean level " + fmt("%.3f", st.mean_level) + " mA, " +
                 std::to_string(cycles) + " cycles, balance error " + fmt("%.2e", rel);
    return out;
}

// ---------------------------------------------------------------- criterion 7
// Separable synthetic grid: linear-in-temperature over 8 temperatures and
// hyperbolic/linear-in-load over 7 currents (1.2 V across the bench resistor
// set). The dependence build must reproduce the grid and a negative load
// slope for the linear decline term.
Outcome dependence_recovery() {
    const std::vector<double> loads{40.0, 80.0, 160.0, 320.0, 480.0,
                                    1200.0 / 1.88, 800.0};
    const std::vector<double> temps{1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
    const double ref_load = 480.0, ref_temp = 20.0;

    auto g_load = [&](std::size_t i, double L) {
        if (i < 4)
            return 1500.0 / (300.0 + L) + 0.5;
        if (i == 4)
            return 1.0 + 0.0008 * (L - ref_load);   // decline steepens with load
        return 1.0 - 5e-5 * (L - ref_load);
    };
    auto g_temp = [&](std::size_t i, double T) {
        return i < 4 ? 1.0 + 0.004 * (T - ref_temp) : 1.0 - 0.0015 * (T - ref_temp);
    };
    auto truth = [&](double L, double T) {
        ModelParams p = kCanonical;
        for (std::size_t i = 0; i < 6; ++i) {
            param_ref(p, i) *= g_load(i, L) / g_load(i, ref_load);
            param_ref(p, i) *= g_temp(i, T) / g_temp(i, ref_temp);
        }
        return p;
    };
    auto point = [&](double L, double T) {
        GridPoint pt;
        pt.cond.load_ma = L;
        pt.cond.temp_c = T;
        pt.params = truth(L, T);
        return pt;
    };

    std::vector<GridPoint> grid;
    for (double L : loads)
        grid.push_back(point(L, ref_temp));
    for (double T : temps)
        if (T != ref_temp)
            grid.push_back(point(ref_load, T));

    const DependenceModel model = build_dependence_model(grid);

    bool classes_ok = true;
    for (std::size_t i = 0; i < 4; ++i)
        classes_ok = classes_ok && model.axes[0].cells[i].cls == DepClass::Hyperbolic;
    for (std::size_t i = 4; i < 6; ++i)
        classes_ok = classes_ok && model.axes[0].cells[i].cls == DepClass::Linear;
    for (std::size_t i = 0; i < 6; ++i)
        classes_ok = classes_ok && model.axes[3].cells[i].cls == DepClass::Linear;
    const double load_slope_of_decline = model.axes[0].cells[4].c0;

    double worst_excess = 0.0;  // prediction error beyond its tolerance
    for (const auto& pt : grid) {
        const PredictedParams pred =
            predict_params(model, *pt.cond.load_ma, 360.0, 0.5, *pt.cond.temp_c);
        for (std::size_t i = 0; i < 6; ++i) {
            const double want = param_value(pt.params, i);
            const double got = param_value(pred.params, i);
            const double tol =
                std::max(10.0 * (model.axes[0].cells[i].rmse + model.axes[3].cells[i].rmse),
                         1e-6 * (1.0 + std::abs(want)));
            worst_excess = std::max(worst_excess, std::abs(got - want) - tol);
        }
    }

    Outcome out;
    out.pass = classes_ok && load_slope_of_decline < 0.0 && worst_excess <= 0.0;
    out.detail = std::string("classes ") + (classes_ok ? "ok" : "wrong") +
                 ", decline load slope " + fmt("%.2e", load_slope_of_decline) +
                 ", worst tolerance excess " + fmt("%.2e", worst_excess);
    return out;
}

// ---------------------------------------------------------------- criterion 8
// Phase boundaries on 20 recovery-tailed curves against thresholds applied
// to the exact analytic derivative, each within 5%.
Outcome phase_segmentation() {
    testutil::Rng rng(0xacce0801u);
    double worst_rel = 0.0;
    int failures = 0;

    for (int trial = 0; trial < 20; ++trial) {
        ModelParams p;
        p.offset = rng.uniform(1.2, 1.3);
        p.start_mag = rng.uniform(2.0, 8.0);
        p.start_shift = rng.uniform(80.0, 250.0);
        const double life = rng.uniform(3000.0, 8000.0);
        p.drop_shift = -life * rng.uniform(1.1, 1.5);
        p.drop_mag = rng.uniform(30.0, 120.0);
        p.slope = -rng.uniform(1e-5, 4e-5);

        const double t_cross = time_to_cutoff(p, 0.9);
        const double dt = t_cross / 2500.0;
        const DischargeCurve curve =
            simulate_constant(p, dt, 0.9, std::nullopt, RecoveryOptions{});

        const PhaseBoundaries got = segment_phases(curve);

        // oracle: same thresholds, taken on the exact derivative
        const std::size_t n = curve.size();
        auto deriv = [&](double t) {
            return -p.start_mag / ((p.start_shift + t) * (p.start_shift + t)) -
                   p.drop_mag / ((p.drop_shift + t) * (p.drop_shift + t)) + p.slope;
        };
        std::size_t j_min = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (curve.voltage_v[i] < curve.voltage_v[j_min])
                j_min = i;

        std::vector<double> mid;
        for (std::size_t i = n / 4; i < 3 * n / 4; ++i)
            mid.push_back(std::abs(deriv(curve.time_s[i])));
        std::nth_element(mid.begin(), mid.begin() + mid.size() / 2, mid.end());
        const double ref = mid[mid.size() / 2];

        double o_init = curve.time_s[0];
        std::size_t i_init = 0;
        for (std::size_t i = 0; i <= j_min; ++i)
            if (std::abs(deriv(curve.time_s[i])) < 3.0 * ref) {
                o_init = curve.time_s[i];
                i_init = i;
                break;
            }
        double o_hold = curve.time_s[j_min > 0 ? j_min - 1 : 0];
        for (std::size_t i = i_init + 1; i <= j_min; ++i)
            if (std::abs(deriv(curve.time_s[i])) > 10.0 * ref) {
                o_hold = curve.time_s[i - 1];
                break;
            }
        const double o_cut = curve.time_s[j_min];
        const double o_rec = curve.time_s[n - 1];

        const double rel =
            std::max({std::abs(got.t_init_end - o_init) / o_init,
                      std::abs(got.t_hold_end - o_hold) / o_hold,
                      std::abs(got.t_cutoff - o_cut) / o_cut,
                      std::abs((got.t_recovery_end ? *got.t_recovery_end : 0.0) - o_rec) /
                          o_rec});
        worst_rel = std::max(worst_rel, rel);
        if (rel > 0.05)
            ++failures;
    }

    Outcome out;
    out.pass = failures == 0;
    out.detail = "worst boundary error " + fmt("%.1f", worst_rel * 100.0) + "%, " +
                 std::to_string(failures) + "/20 out of band";
    return out;
}

// ---------------------------------------------------------------- criterion 9
// End-to-end magnitude: an 850 mAh generator at 480 mA, refit from its own
// 1 s samples, must put the 0.9 V lifetime at 100 minutes within 15%.
Outcome runtime_magnitude() {
    const ModelParams gen = reference_discharge_params(850.0, 480.0);
    const DischargeCurve curve = simulate_constant(gen, 1.0, 0.9, 480.0);
    const FitResult fit = fit_discharge_curve(curve);
    if (!fit.converged)
        return {false, "fit did not converge"};

    const double life = time_to_cutoff(fit.params, 0.9);
    const double target = 100.0 * 60.0;

    Outcome out;
    out.pass = std::abs(life - target) <= 0.15 * target;
    out.detail = "fitted lifetime " + fmt("%.0f", life) + " s (" +
                 fmt("%.1f", life / 60.0) + " min) vs 100 min +/- 15%";
    return out;
}

} // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Entry> entries{
        {"round-trip fitting", round_trip_fitting},
        {"cutoff consistency", cutoff_consistency},
        {"detector window oracle", detector_window_oracle},
        {"charge termination", charge_termination},
        {"pulse envelope integrity", pulse_envelope_integrity},
        {"charge balance", charge_balance},
        {"dependence recovery", dependence_recovery},
        {"phase segmentation", phase_segmentation},
        {"runtime magnitude", runtime_magnitude},
    };

    int failed = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Outcome out;
        try {
            out = entries[i].fn();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        if (!out.pass)
            ++failed;
        std::printf("criterion %zu [%s]: %s (%s)\n", i + 1, entries[i].name,
                    out.pass ? "PASS" : "FAIL", out.detail.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", entries.size() - failed, entries.size());
    return failed == 0 ? 0 : 1;
}
