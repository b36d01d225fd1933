#pragma once

// Shared test utilities: a fixed-output RNG, a reference parameter generator,
// and independent oracles kept deliberately separate from the library code.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

#include "nimh/curve.hpp"
#include "nimh/model.hpp"

namespace testutil {

// Fresh scratch directory per call; unique across concurrently running test
// binaries.
inline std::string temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    static const std::uint64_t run_id = std::random_device{}();
    static std::uint64_t counter = 0;
    const fs::path p = fs::temp_directory_path() /
                       ("nimh-" + tag + "-" + std::to_string(run_id) + "-" +
                        std::to_string(counter++));
    fs::create_directories(p);
    return p.string();
}

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    std::uint64_t next() { return eng(); }
};

// Random parameter sets that are guaranteed valid for a 0.9 V cutoff: the
// curve starts well above 0.9 and dives to the end-of-life pole past the
// plateau.
inline nimh::ModelParams random_params(Rng& rng) {
    nimh::ModelParams p;
    p.offset = rng.uniform(1.15, 1.35);
    p.start_mag = rng.uniform(1.0, 10.0);
    p.start_shift = rng.uniform(20.0, 200.0);
    const double life = rng.uniform(2000.0, 9000.0);
    p.drop_shift = -life * rng.uniform(1.05, 1.6);
    p.drop_mag = rng.uniform(20.0, 150.0);
    p.slope = -rng.uniform(5e-6, 5e-5);
    return p;
}

// Direct evaluation, written independently of the library.
inline double direct_eval(const nimh::ModelParams& p, double t) {
    double v = p.slope * t + p.offset;
    if (p.start_mag != 0.0)
        v += p.start_mag / (p.start_shift + t);
    if (p.drop_mag != 0.0)
        v += p.drop_mag / (p.drop_shift + t);
    return v;
}

// Cutoff-crossing oracle: coarse forward scan for the first sign change,
// then bisection to full double precision.
inline double oracle_cutoff_time(const nimh::ModelParams& p, double v_cutoff) {
    double limit = 1e9;
    if (p.drop_mag != 0.0 && p.drop_shift < 0.0)
        limit = -p.drop_shift * (1.0 - 1e-12);
    if (!(direct_eval(p, 0.0) > v_cutoff))
        throw std::runtime_error("oracle: curve starts at or below the cutoff");

    const double step = std::min(1.0, limit / 1e6);
    double lo = 0.0, hi = -1.0;
    for (double t = step; t <= limit; t += step) {
        if (direct_eval(p, t) <= v_cutoff) {
            hi = t;
            lo = t - step;
            break;
        }
    }
    if (hi < 0.0)
        throw std::runtime_error("oracle: cutoff not reached");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (direct_eval(p, mid) > v_cutoff)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Samples the analytic model onto a uniform grid (test-side, no simulator).
inline nimh::DischargeCurve sample_curve(const nimh::ModelParams& p, double dt,
                                         double t_end) {
    nimh::DischargeCurve c;
    for (double t = 0.0; t <= t_end + 1e-9; t += dt) {
        c.time_s.push_back(t);
        c.voltage_v.push_back(direct_eval(p, t));
    }
    return c;
}

} // namespace testutil
