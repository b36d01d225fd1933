#include "nimh/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "nimh/errors.hpp"
#include "nimh/fitting.hpp"
#include "text_util.hpp"

namespace nimh {

namespace {

std::optional<double> axis_value(const Conditions& c, std::size_t axis) {
    switch (axis) {
    case 0: return c.load_ma;
    case 1: return c.period_s;
    case 2: return c.duty;
    case 3: return c.temp_c;
    default: throw DomainError("axis index out of range");
    }
}

std::optional<double>& axis_slot(Conditions& c, std::size_t axis) {
    switch (axis) {
    case 0: return c.load_ma;
    case 1: return c.period_s;
    case 2: return c.duty;
    case 3: return c.temp_c;
    default: throw DomainError("axis index out of range");
    }
}

bool close(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::size_t distinct_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t d = v.empty() ? 0 : 1;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!close(v[i], v[i - 1]))
            ++d;
    return d;
}

AxisCell linear_cell(std::span<const double> x, std::span<const double> y) {
    const LinCoef lc = fit_linear(x, y);
    AxisCell cell;
    cell.cls = DepClass::Linear;
    cell.c0 = lc.slope;
    cell.c1 = lc.intercept;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = lc.slope * x[i] + lc.intercept - y[i];
        sse += e * e;
    }
    cell.rmse = std::sqrt(sse / static_cast<double>(x.size()));
    cell.ok = true;
    return cell;
}

AxisCell hyperbolic_cell(std::span<const double> x, std::span<const double> y) {
    const HypFit hf = fit_hyperbolic(x, y);
    if (!hf.converged)
        throw DomainError("hyperbolic cell fit did not converge");
    AxisCell cell;
    cell.cls = DepClass::Hyperbolic;
    cell.c0 = hf.coef.mag;
    cell.c1 = hf.coef.shift;
    cell.c2 = hf.coef.offset;
    cell.rmse = hf.rmse;
    cell.ok = true;
    return cell;
}

enum class CellPlan { LinearOnly, HyperbolicFirst, BestOfBoth };

} // namespace

DependenceModel build_dependence_model(const std::vector<GridPoint>& points) {
    if (points.empty())
        throw DomainError("dependence grid is empty");

    std::array<bool, 4> present{};
    for (std::size_t ax = 0; ax < 4; ++ax)
        present[ax] = axis_value(points.front().cond, ax).has_value();
    for (const auto& pt : points)
        for (std::size_t ax = 0; ax < 4; ++ax)
            if (axis_value(pt.cond, ax).has_value() != present[ax])
                throw DomainError(std::string("dependence axis '") + kAxisKeys[ax] +
                                  "' is set for only part of the grid");

    std::array<std::vector<double>, 4> vals;
    std::array<bool, 4> varying{};
    for (std::size_t ax = 0; ax < 4; ++ax) {
        if (!present[ax])
            continue;
        for (const auto& pt : points)
            vals[ax].push_back(*axis_value(pt.cond, ax));
        varying[ax] = distinct_count(vals[ax]) >= 2;
    }
    if (std::none_of(varying.begin(), varying.end(), [](bool b) { return b; }))
        throw DomainError("dependence grid sweeps no axis");

    // Reference: the grid point nearest (per-axis normalized) to the medians.
    std::array<double, 4> med{};
    std::array<double, 4> norm{};
    for (std::size_t ax = 0; ax < 4; ++ax) {
        if (!varying[ax])
            continue;
        std::vector<double> v = vals[ax];
        std::sort(v.begin(), v.end());
        med[ax] = v[v.size() / 2];
        norm[ax] = std::max(v.back() - v.front(), 1e-30);
    }
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        double score = 0.0;
        for (std::size_t ax = 0; ax < 4; ++ax)
            if (varying[ax])
                score += std::abs(*axis_value(points[i].cond, ax) - med[ax]) / norm[ax];
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }
    const GridPoint& ref = points[best];

    DependenceModel model;
    model.reference = ref.cond;
    model.ref_params = ref.params;

    for (std::size_t ax = 0; ax < 4; ++ax) {
        if (!varying[ax])
            continue;
        auto& axis = model.axes[ax];
        axis.ref_x = *axis_value(ref.cond, ax);
        axis.x_min = *std::min_element(vals[ax].begin(), vals[ax].end());
        axis.x_max = *std::max_element(vals[ax].begin(), vals[ax].end());

        // Sweep through the reference: all other varying axes pinned.
        std::vector<double> x;
        std::array<std::vector<double>, 6> y;
        for (const auto& pt : points) {
            bool on_sweep = true;
            for (std::size_t ax2 = 0; ax2 < 4 && on_sweep; ++ax2)
                if (ax2 != ax && varying[ax2] &&
                    !close(*axis_value(pt.cond, ax2), *axis_value(ref.cond, ax2)))
                    on_sweep = false;
            if (!on_sweep)
                continue;
            x.push_back(*axis_value(pt.cond, ax));
            for (std::size_t i = 0; i < 6; ++i)
                y[i].push_back(param_value(pt.params, i));
        }
        const std::size_t distinct = distinct_count(x);
        if (distinct < 2)
            throw DomainError(std::string("dependence axis '") + kAxisKeys[ax] +
                              "' varies but its sweep through the reference is degenerate");

        for (std::size_t i = 0; i < 6; ++i) {
            CellPlan plan;
            if (ax == 3)
                plan = CellPlan::LinearOnly;  // temperature acts linearly
            else if (ax == 0)
                plan = i >= 4 ? CellPlan::LinearOnly : CellPlan::HyperbolicFirst;
            else
                plan = CellPlan::BestOfBoth;

            double scale = 0.0;
            for (double yy : y[i])
                scale = std::max(scale, std::abs(yy));
            if (scale == 0.0) {
                // constant-zero parameter: identity factor keeps it zero
                axis.cells[i] = AxisCell{DepClass::Linear, 0.0, 1.0, 0.0, 0.0, true};
                model.notes.push_back(std::string("axis ") + kAxisKeys[ax] + " param " +
                                      kParamKeys[i] + ": constant zero, identity factor");
                continue;
            }

            AxisCell cell;
            try {
                if (plan == CellPlan::LinearOnly) {
                    cell = linear_cell(x, y[i]);
                } else if (plan == CellPlan::HyperbolicFirst) {
                    if (distinct >= 3) {
                        try {
                            cell = hyperbolic_cell(x, y[i]);
                        } catch (const DomainError&) {
                            cell = linear_cell(x, y[i]);
                            model.notes.push_back(std::string("axis ") + kAxisKeys[ax] +
                                                  " param " + kParamKeys[i] +
                                                  ": hyperbolic fit failed, linear fallback");
                        }
                    } else {
                        cell = linear_cell(x, y[i]);
                        model.notes.push_back(std::string("axis ") + kAxisKeys[ax] +
                                              " param " + kParamKeys[i] +
                                              ": sweep too thin for hyperbolic, linear fallback");
                    }
                } else {
                    cell = linear_cell(x, y[i]);
                    if (distinct >= 3) {
                        try {
                            const AxisCell hyp = hyperbolic_cell(x, y[i]);
                            if (hyp.rmse < cell.rmse)
                                cell = hyp;
                        } catch (const DomainError&) {
                            // keep the linear fit
                        }
                    }
                }
            } catch (const DomainError& e) {
                axis.cells[i] = AxisCell{};
                model.notes.push_back(std::string("axis ") + kAxisKeys[ax] + " param " +
                                      kParamKeys[i] + ": fit unavailable (" + e.what() + ")");
                continue;
            }

            // The multiplicative composition divides by the factor at the
            // reference; a near-zero value there would blow up predictions.
            if (std::abs(cell.value_at(axis.ref_x)) < 1e-9 * scale) {
                cell.ok = false;
                model.notes.push_back(std::string("axis ") + kAxisKeys[ax] + " param " +
                                      kParamKeys[i] + ": reference factor is ~0, cell disabled");
            }
            axis.cells[i] = cell;
        }
        axis.modeled = true;
    }
    return model;
}

PredictedParams predict_params(const DependenceModel& model, double load_ma,
                               double period_s, double duty,
                               std::optional<double> temp_c) {
    const std::array<std::optional<double>, 4> query{load_ma, period_s, duty, temp_c};

    PredictedParams out;
    out.params = model.ref_params;

    for (std::size_t ax = 0; ax < 4; ++ax) {
        const auto& axis = model.axes[ax];
        if (!axis.modeled) {
            const auto ref_val = axis_value(model.reference, ax);
            if (query[ax] && ref_val && !close(*query[ax], *ref_val))
                out.notes.push_back(std::string("axis ") + kAxisKeys[ax] +
                                    " not modeled; query value ignored");
            continue;
        }

        double x;
        if (query[ax]) {
            x = *query[ax];
        } else {
            x = axis.ref_x;
            out.notes.push_back(std::string("axis ") + kAxisKeys[ax] +
                                " not given; reference value assumed");
        }
        if ((x < axis.x_min && !close(x, axis.x_min)) ||
            (x > axis.x_max && !close(x, axis.x_max)))
            out.extrapolated = true;

        unsigned skipped = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            const AxisCell& cell = axis.cells[i];
            if (!cell.ok) {
                ++skipped;
                continue;
            }
            param_ref(out.params, i) *= cell.value_at(x) / cell.value_at(axis.ref_x);
        }
        if (skipped)
            out.notes.push_back(std::string("axis ") + kAxisKeys[ax] + ": " +
                                std::to_string(skipped) + " parameter cell(s) skipped");
    }

    try {
        const double t_end = time_to_cutoff(out.params, 0.9);
        const ValidityReport rep = validate_params(out.params, t_end);
        out.within_validity = rep.valid;
        for (const auto& v : rep.violations)
            out.notes.push_back("validity: " + v);
    } catch (const DomainError& e) {
        out.within_validity = false;
        out.notes.push_back(std::string("validity check failed: ") + e.what());
    }
    return out;
}

std::string serialize_dependence(const DependenceModel& model) {
    std::string out = "NIMH-DEP v1\n";

    out += "ref";
    for (std::size_t ax = 0; ax < 4; ++ax)
        if (const auto v = axis_value(model.reference, ax))
            out += std::string(" ") + kAxisKeys[ax] + "=" + detail::fmt_full(*v);
    out += '\n';

    out += "ref_params";
    for (std::size_t i = 0; i < 6; ++i)
        out += std::string(" ") + kParamKeys[i] + "=" +
               detail::fmt_full(param_value(model.ref_params, i));
    out += '\n';

    for (const auto& note : model.notes)
        out += "note " + note + "\n";

    for (std::size_t ax = 0; ax < 4; ++ax) {
        const auto& axis = model.axes[ax];
        if (!axis.modeled)
            continue;
        out += std::string("axis ") + kAxisKeys[ax] + " min=" + detail::fmt_full(axis.x_min) +
               " max=" + detail::fmt_full(axis.x_max) + " ref=" + detail::fmt_full(axis.ref_x) +
               "\n";
        for (std::size_t i = 0; i < 6; ++i) {
            const AxisCell& c = axis.cells[i];
            out += std::string("cell ") + kAxisKeys[ax] + " " + kParamKeys[i] + " " +
                   (c.cls == DepClass::Linear ? "lin" : "hyp") +
                   " c0=" + detail::fmt_full(c.c0) + " c1=" + detail::fmt_full(c.c1) +
                   " c2=" + detail::fmt_full(c.c2) + " rmse=" + detail::fmt_full(c.rmse) +
                   " ok=" + (c.ok ? "1" : "0") + "\n";
        }
    }
    return out;
}

namespace {

std::size_t axis_index_of(std::string_view key, std::size_t lineno) {
    for (std::size_t ax = 0; ax < 4; ++ax)
        if (key == kAxisKeys[ax])
            return ax;
    throw ParseError("unknown axis '" + std::string(key) + "'", lineno);
}

std::size_t param_index_of(std::string_view key, std::size_t lineno) {
    for (std::size_t i = 0; i < 6; ++i)
        if (key == kParamKeys[i])
            return i;
    throw ParseError("unknown parameter '" + std::string(key) + "'", lineno);
}

// splits "key=value", checking the key
double kv_number(std::string_view tok, std::string_view key, std::size_t lineno) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos || detail::trim(tok.substr(0, eq)) != key)
        throw ParseError("expected '" + std::string(key) + "=<value>'", lineno);
    double v = 0.0;
    if (!detail::parse_number(tok.substr(eq + 1), v))
        throw ParseError("bad number in '" + std::string(tok) + "'", lineno);
    return v;
}

} // namespace

DependenceModel parse_dependence(const std::string& text) {
    const auto lines = detail::split_lines(text);
    DependenceModel model;
    bool header = false, ref_seen = false, params_seen = false;

    std::size_t lineno = 0;
    for (std::string_view raw : lines) {
        ++lineno;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#')
            continue;
        if (!header) {
            if (line != "NIMH-DEP v1")
                throw ParseError("unsupported dependence file header", lineno);
            header = true;
            continue;
        }

        const auto toks = detail::split_ws(line);
        const std::string_view head = toks[0];

        if (head == "ref") {
            ref_seen = true;
            for (std::size_t i = 1; i < toks.size(); ++i) {
                const auto eq = toks[i].find('=');
                if (eq == std::string_view::npos)
                    throw ParseError("ref entries must be axis=value", lineno);
                const std::size_t ax = axis_index_of(detail::trim(toks[i].substr(0, eq)), lineno);
                double v = 0.0;
                if (!detail::parse_number(toks[i].substr(eq + 1), v))
                    throw ParseError("bad number in ref entry", lineno);
                axis_slot(model.reference, ax) = v;
            }
        } else if (head == "ref_params") {
            if (toks.size() != 7)
                throw ParseError("ref_params needs six entries", lineno);
            params_seen = true;
            for (std::size_t i = 0; i < 6; ++i)
                param_ref(model.ref_params, i) = kv_number(toks[i + 1], kParamKeys[i], lineno);
        } else if (head == "note") {
            const auto sp = line.find_first_of(" \t");
            model.notes.push_back(sp == std::string_view::npos
                                      ? std::string{}
                                      : std::string(detail::trim(line.substr(sp))));
        } else if (head == "axis") {
            if (toks.size() != 5)
                throw ParseError("axis line needs 'axis <name> min= max= ref='", lineno);
            const std::size_t ax = axis_index_of(toks[1], lineno);
            auto& axis = model.axes[ax];
            axis.modeled = true;
            axis.x_min = kv_number(toks[2], "min", lineno);
            axis.x_max = kv_number(toks[3], "max", lineno);
            axis.ref_x = kv_number(toks[4], "ref", lineno);
        } else if (head == "cell") {
            if (toks.size() != 9)
                throw ParseError("cell line needs 9 tokens", lineno);
            const std::size_t ax = axis_index_of(toks[1], lineno);
            if (!model.axes[ax].modeled)
                throw ParseError("cell before its axis line", lineno);
            const std::size_t pi = param_index_of(toks[2], lineno);
            AxisCell cell;
            if (toks[3] == "lin")
                cell.cls = DepClass::Linear;
            else if (toks[3] == "hyp")
                cell.cls = DepClass::Hyperbolic;
            else
                throw ParseError("cell class must be lin or hyp", lineno);
            cell.c0 = kv_number(toks[4], "c0", lineno);
            cell.c1 = kv_number(toks[5], "c1", lineno);
            cell.c2 = kv_number(toks[6], "c2", lineno);
            cell.rmse = kv_number(toks[7], "rmse", lineno);
            const auto eq = toks[8].find('=');
            if (eq == std::string_view::npos || toks[8].substr(0, eq) != "ok")
                throw ParseError("expected ok=0|1", lineno);
            const std::string_view fl = toks[8].substr(eq + 1);
            if (fl == "1")
                cell.ok = true;
            else if (fl == "0")
                cell.ok = false;
            else
                throw ParseError("expected ok=0|1", lineno);
            model.axes[ax].cells[pi] = cell;
        } else {
            throw ParseError("unknown dependence directive '" + std::string(head) + "'", lineno);
        }
    }
    if (!header)
        throw ParseError("missing NIMH-DEP header");
    if (!ref_seen || !params_seen)
        throw ParseError("dependence file missing ref or ref_params");
    return model;
}

} // namespace nimh
