#include "nimh/curve.hpp"

#include <cmath>

#include "nimh/errors.hpp"

namespace nimh {

void validate_curve(const DischargeCurve& curve) {
    const std::size_t n = curve.time_s.size();
    if (n == 0)
        throw DomainError("curve has no samples");
    if (curve.voltage_v.size() != n)
        throw DomainError("curve voltage column size mismatch");
    if (!curve.current_ma.empty() && curve.current_ma.size() != n)
        throw DomainError("curve current column size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(curve.time_s[i]))
            throw DomainError("curve time is not finite at sample " + std::to_string(i));
        if (i > 0 && !(curve.time_s[i] > curve.time_s[i - 1]))
            throw DomainError("curve time not strictly increasing at sample " + std::to_string(i));
        if (!std::isfinite(curve.voltage_v[i]) || curve.voltage_v[i] < 0.0)
            throw DomainError("curve voltage invalid at sample " + std::to_string(i));
    }
    for (std::size_t i = 0; i < curve.current_ma.size(); ++i) {
        if (!std::isfinite(curve.current_ma[i]))
            throw DomainError("curve current is not finite at sample " + std::to_string(i));
    }
}

} // namespace nimh
