#include "nimh/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "nimh/errors.hpp"

namespace nimh {

namespace {

// Relative closeness that counts as "on the pole" for evaluation purposes.
constexpr double kPoleRelTol = 1e-12;

bool on_pole(double shift, double t) {
    const double den = shift + t;
    const double scale = std::max({1.0, std::abs(shift), std::abs(t)});
    return std::abs(den) <= kPoleRelTol * scale;
}

} // namespace

double param_value(const ModelParams& p, std::size_t index) {
    return param_ref(const_cast<ModelParams&>(p), index);
}

double& param_ref(ModelParams& p, std::size_t index) {
    switch (index) {
    case 0: return p.start_mag;
    case 1: return p.start_shift;
    case 2: return p.drop_mag;
    case 3: return p.drop_shift;
    case 4: return p.slope;
    case 5: return p.offset;
    default: throw DomainError("model parameter index out of range");
    }
}

double eval_model(const ModelParams& p, double t_s) {
    double v = p.slope * t_s + p.offset;
    if (p.start_mag != 0.0) {
        if (on_pole(p.start_shift, t_s))
            throw DomainError("model pole hit at t = " + std::to_string(t_s));
        v += p.start_mag / (p.start_shift + t_s);
    }
    if (p.drop_mag != 0.0) {
        if (on_pole(p.drop_shift, t_s))
            throw DomainError("model pole hit at t = " + std::to_string(t_s));
        v += p.drop_mag / (p.drop_shift + t_s);
    }
    return v;
}

ValidityReport validate_params(const ModelParams& p, double t_end_s) {
    if (!(t_end_s > 0.0))
        throw DomainError("validation window must have positive length");

    ValidityReport rep;
    auto fail = [&rep](std::string msg) {
        rep.valid = false;
        rep.violations.push_back(std::move(msg));
    };

    if (!(p.start_shift > 0.0))
        fail("initial-transient pole not before t=0 (start_shift must be > 0)");
    if (!(p.drop_shift < 0.0))
        fail("end-of-life pole offset must be negative");
    else if (!(-p.drop_shift > t_end_s))
        fail("end-of-life pole lies inside the evaluation window");

    for (double x : {p.start_mag, p.start_shift, p.drop_mag, p.drop_shift, p.slope, p.offset}) {
        if (!std::isfinite(x)) {
            fail("parameter is not finite");
            break;
        }
    }

    // Probe the window; pole placement above should already guarantee this,
    // but a report must never lie about finiteness.
    constexpr int kProbes = 1000;
    for (int i = 0; i <= kProbes && rep.valid; ++i) {
        const double t = t_end_s * static_cast<double>(i) / kProbes;
        try {
            if (!std::isfinite(eval_model(p, t)))
                fail("model evaluates non-finite inside the window");
        } catch (const DomainError&) {
            fail("model pole inside the window");
        }
    }
    return rep;
}

double time_to_cutoff(const ModelParams& p, double v_cutoff) {
    if (!std::isfinite(v_cutoff))
        throw DomainError("cutoff voltage must be finite");

    const double v0 = eval_model(p, 0.0);
    if (!(v0 > v_cutoff))
        throw DomainError("curve does not start above the cutoff voltage");

    // Upper search limit: just short of the end-of-life pole when there is
    // one ahead of t=0, otherwise found by doubling.
    double t_hi;
    if (p.drop_mag != 0.0 && p.drop_shift < 0.0) {
        t_hi = -p.drop_shift * (1.0 - 1e-9);
    } else if (p.start_mag != 0.0 && p.start_shift < 0.0) {
        t_hi = -p.start_shift * (1.0 - 1e-9);
    } else {
        t_hi = 1.0;
        while (t_hi < 1e9 && eval_model(p, t_hi) > v_cutoff)
            t_hi *= 2.0;
        if (eval_model(p, t_hi) > v_cutoff)
            throw DomainError("cutoff voltage never reached");
    }

    // Bracket scan: first sign change over 64 equally spaced points.
    constexpr int kScan = 64;
    double lo = 0.0, hi = -1.0;
    double v_lo = v0;
    for (int i = 1; i <= kScan; ++i) {
        const double t = t_hi * static_cast<double>(i) / kScan;
        const double v = eval_model(p, t);
        if (v <= v_cutoff) {
            hi = t;
            break;
        }
        lo = t;
        v_lo = v;
    }
    (void)v_lo;
    if (hi < 0.0)
        throw DomainError("cutoff voltage never reached");

    // Bisect until the bracket is tight in time AND the midpoint residual is
    // deep below the documented 1e-6 V guarantee.
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;  // bracket collapsed to adjacent doubles
        const double v = eval_model(p, mid);
        if (hi - lo <= 1e-3 && std::abs(v - v_cutoff) <= 1e-9)
            break;
        if (v > v_cutoff)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

PhaseBoundaries segment_phases(const DischargeCurve& curve) {
    validate_curve(curve);
    const std::size_t n = curve.size();
    if (n < 16)
        throw DomainError("segmentation needs at least 16 samples");

    const auto& t = curve.time_s;
    const auto& v = curve.voltage_v;

    // Discrete slope, centered where possible.
    std::vector<double> slope(n);
    slope[0] = (v[1] - v[0]) / (t[1] - t[0]);
    slope[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        slope[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);

    // Centered moving average, window shrinking near the ends.
    constexpr std::size_t kHalf = 4;  // 9-sample window
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= kHalf ? i - kHalf : 0;
        const std::size_t b = std::min(i + kHalf, n - 1);
        double acc = 0.0;
        for (std::size_t j = a; j <= b; ++j)
            acc += slope[j];
        smooth[i] = acc / static_cast<double>(b - a + 1);
    }

    // Reference slope: median magnitude over the middle half of the record.
    std::vector<double> mid;
    mid.reserve(n / 2);
    for (std::size_t i = n / 4; i < 3 * n / 4; ++i)
        mid.push_back(std::abs(smooth[i]));
    const std::size_t h = mid.size() / 2;
    std::nth_element(mid.begin(), mid.begin() + h, mid.end());
    const double ref = mid[h];
    const double theta_settle = 3.0 * ref;
    const double theta_drop = 10.0 * ref;

    PhaseBoundaries b;

    // Cutoff knee: the voltage minimum (first occurrence).
    std::size_t j_min = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] < v[j_min])
            j_min = i;
    b.t_cutoff = t[j_min];

    // Recovery tail: voltage rises again after the minimum.
    bool rises = false;
    for (std::size_t i = j_min + 1; i < n; ++i)
        if (v[i] > v[j_min]) {
            rises = true;
            break;
        }
    if (rises)
        b.t_recovery_end = t[n - 1];

    // Initial transient ends where the smoothed slope settles under theta_settle.
    std::size_t i_init = 0;
    bool found_init = false;
    for (std::size_t i = 0; i <= j_min; ++i) {
        if (std::abs(smooth[i]) < theta_settle) {
            i_init = i;
            found_init = true;
            break;
        }
    }
    if (!found_init)
        b.degenerate = true;  // left pinned at the first sample
    b.t_init_end = t[i_init];

    // Plateau ends on the last sample before the slope magnitude exceeds
    // theta_drop on the way into the terminal drop.
    std::size_t i_hold = j_min > 0 ? j_min - 1 : 0;
    bool found_hold = false;
    for (std::size_t i = i_init + 1; i <= j_min; ++i) {
        if (std::abs(smooth[i]) > theta_drop) {
            i_hold = i - 1;
            found_hold = true;
            break;
        }
    }
    if (!found_hold)
        b.degenerate = true;  // pinned just before the minimum

    b.t_hold_end = t[i_hold];

    if (!(b.t_init_end < b.t_hold_end && b.t_hold_end < b.t_cutoff))
        throw DomainError("segmentation failed: boundaries out of order");
    return b;
}

} // namespace nimh
