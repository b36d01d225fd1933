#include "nimh/analysis.hpp"

#include <algorithm>

#include "nimh/errors.hpp"

namespace nimh {

CapacityReport integrate_capacity(const DischargeCurve& curve, double v_cutoff) {
    validate_curve(curve);
    if (!curve.has_current())
        throw DomainError("integrate_capacity: curve has no current column");
    if (curve.size() < 2)
        throw DomainError("integrate_capacity: needs at least 2 samples");

    double charge_mas = 0.0;  // mA * s
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double dt = curve.time_s[i] - curve.time_s[i - 1];
        charge_mas += 0.5 * (curve.current_ma[i] + curve.current_ma[i - 1]) * dt;
    }

    CapacityReport rep;
    rep.charge_mah = charge_mas / 3600.0;
    rep.duration_s = curve.time_s.back();
    rep.cutoff_reached = curve.voltage_v.back() <= v_cutoff + 1e-12;
    return rep;
}

DischargeCurve derivative_curve(const DischargeCurve& curve, std::size_t window) {
    validate_curve(curve);
    const std::size_t n = curve.size();
    if (n < 3)
        throw DomainError("derivative_curve: needs at least 3 samples");
    if (window < 1 || window % 2 == 0)
        throw DomainError("derivative_curve: window must be odd and at least 1");

    const auto& t = curve.time_s;
    const auto& v = curve.voltage_v;

    std::vector<double> d(n);
    d[0] = (v[1] - v[0]) / (t[1] - t[0]);
    d[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);

    DischargeCurve out;
    out.time_s = t;
    out.meta = curve.meta;
    out.meta.label = curve.meta.label ? *curve.meta.label + " dV/dt" : std::string("dV/dt");
    out.voltage_v.resize(n);

    const std::size_t half = window / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(i + half, n - 1);
        double acc = 0.0;
        for (std::size_t j = a; j <= b; ++j)
            acc += d[j];
        out.voltage_v[i] = acc / static_cast<double>(b - a + 1);
    }
    return out;
}

} // namespace nimh
