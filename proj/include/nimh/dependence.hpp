#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nimh/model.hpp"

namespace nimh {

// Operating point of one characterization run. Axes a data set does not
// sweep may be left unset, but each axis must be set either for all grid
// points or for none.
struct Conditions {
    std::optional<double> load_ma;   // discharge current
    std::optional<double> period_s;  // pulse period
    std::optional<double> duty;      // pulse duty cycle, 0..1
    std::optional<double> temp_c;    // ambient temperature
};

struct GridPoint {
    Conditions cond;
    ModelParams params;
};

enum class DepClass { Linear, Hyperbolic };

// One model parameter's dependence on one axis:
// linear  g(x) = c0 * x + c1, hyperbolic  g(x) = c0 / (c1 + x) + c2.
struct AxisCell {
    DepClass cls = DepClass::Linear;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    double rmse = 0.0;
    bool ok = false;

    double value_at(double x) const {
        return cls == DepClass::Linear ? c0 * x + c1 : c0 / (c1 + x) + c2;
    }
};

// Separable multiplicative condition model around a reference grid point:
// P_i(x1..x4) = P_i(ref) * prod over modeled axes of g_ia(x_a) / g_ia(ref_a).
// Axis order: 0 = load (L), 1 = period (p), 2 = duty (d), 3 = temperature (T).
struct DependenceModel {
    struct Axis {
        bool modeled = false;
        double x_min = 0.0, x_max = 0.0;  // hull over all grid points
        double ref_x = 0.0;
        std::array<AxisCell, 6> cells;    // indexed like kParamKeys
    };

    Conditions reference;
    ModelParams ref_params;
    std::array<Axis, 4> axes;
    std::vector<std::string> notes;  // fallbacks and degeneracies seen during the build
};

inline constexpr std::array<const char*, 4> kAxisKeys{"L", "p", "d", "T"};

// Builds per-axis univariate fits from axis sweeps through the reference
// point (the grid point closest to the per-axis medians). Temperature cells
// are linear; over load the slope/offset cells are linear and the four
// hyperbola cells hyperbolic; period and duty pick whichever class fits
// better. Throws DomainError for inconsistent axis presence, a grid with no
// varying axis, or a varying axis whose sweep through the reference is too
// thin to fit.
DependenceModel build_dependence_model(const std::vector<GridPoint>& points);

struct PredictedParams {
    ModelParams params;
    bool extrapolated = false;     // some queried axis left the data hull
    bool within_validity = false;  // params pass validate_params at their own cutoff
    std::vector<std::string> notes;
};

// Evaluates the model at a query point. Axes the model does not cover
// contribute factor 1 (noted); an absent temperature falls back to the
// reference temperature.
PredictedParams predict_params(const DependenceModel& model, double load_ma,
                               double period_s, double duty,
                               std::optional<double> temp_c = std::nullopt);

// Versioned line format, header "NIMH-DEP v1". parse(serialize(m)) restores
// every coefficient bit-exactly.
std::string serialize_dependence(const DependenceModel& model);
DependenceModel parse_dependence(const std::string& text);

} // namespace nimh
