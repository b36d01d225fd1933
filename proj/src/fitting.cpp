#include "nimh/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "nimh/errors.hpp"

namespace nimh {

namespace {

struct LmOptions {
    int max_iter = 500;
    double gtol = 1e-10;     // infinity norm of J^T r
    double steptol = 1e-12;  // relative step length
    double ftol = 1e-10;     // relative cost reduction, actual and predicted
    double lambda0 = 1e-3;
};

struct LmOutcome {
    Eigen::VectorXd p;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

// Damped least squares with diagonal (Marquardt) scaling. eval fills the
// residual vector and, when J is non-null, the Jacobian; feasible guards the
// constraint region and infeasible steps are rejected like uphill ones.
template <typename EvalFn, typename FeasibleFn>
LmOutcome run_lm(Eigen::VectorXd p, EvalFn&& eval, FeasibleFn&& feasible,
                 const LmOptions& opt) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    eval(p, r, &J);
    double cost = r.squaredNorm();
    double lambda = opt.lambda0;

    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it) {
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= opt.gtol) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd diag = JtJ.diagonal().cwiseMax(1e-12);

        bool stepped = false;
        for (int tries = 0; tries < 50; ++tries) {
            Eigen::MatrixXd M = JtJ;
            M.diagonal() += lambda * diag;
            const Eigen::VectorXd delta = M.ldlt().solve(-g);
            if (delta.allFinite()) {
                const Eigen::VectorXd pn = p + delta;
                if (feasible(pn)) {
                    Eigen::VectorXd rn;
                    eval(pn, rn, nullptr);
                    const double cn = rn.squaredNorm();
                    if (cn < cost) {
                        // Flat-valley exit: the step is negligible, or both
                        // the achieved and the model-predicted reduction are.
                        // Predicted reduction alone stays large for a poor
                        // step mid-descent, so this cannot fire early.
                        const double actred = cost - cn;
                        const double prered = -delta.dot(g) +
                                              lambda * diag.dot(delta.cwiseAbs2());
                        const bool tiny =
                            delta.norm() <= opt.steptol * (p.norm() + opt.steptol) ||
                            (actred <= opt.ftol * cost && prered <= opt.ftol * cost &&
                             actred <= 2.0 * prered);
                        p = pn;
                        eval(p, r, &J);
                        cost = cn;
                        lambda = std::max(lambda * 0.3, 1e-14);
                        stepped = true;
                        if (tiny)
                            converged = true;
                        break;
                    }
                }
            }
            lambda = std::min(lambda * 10.0, 1e15);
        }
        if (converged)
            break;
        if (!stepped) {
            // No feasible downhill step at maximum damping: the machine
            // precision floor of this cost. Convergence if the gradient has
            // flattened out too; a large gradient means a constraint wall.
            converged = g.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + cost);
            break;
        }
    }

    LmOutcome out;
    out.p = std::move(p);
    out.cost = cost;
    out.iterations = it;
    out.converged = converged;
    return out;
}

} // namespace

LinCoef fit_linear(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DomainError("fit_linear: x/y size mismatch");
    const std::size_t n = x.size();
    if (n < 2)
        throw DomainError("fit_linear: needs at least 2 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if (sxx == 0.0)
        throw DomainError("fit_linear: x values are all equal");

    LinCoef c;
    c.slope = sxy / sxx;
    c.intercept = my - c.slope * mx;
    return c;
}

HypFit fit_hyperbolic(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DomainError("fit_hyperbolic: x/y size mismatch");
    const std::size_t n = x.size();
    if (n < 3)
        throw DomainError("fit_hyperbolic: needs at least 3 points");

    double x_min = x[0], x_max = x[0];
    for (double xi : x) {
        x_min = std::min(x_min, xi);
        x_max = std::max(x_max, xi);
    }
    const double span = x_max - x_min;
    if (span <= 0.0)
        throw DomainError("fit_hyperbolic: needs at least 3 distinct x values");
    {
        // three distinct values, not just a nonzero span
        std::vector<double> xs(x.begin(), x.end());
        std::sort(xs.begin(), xs.end());
        std::size_t distinct = 1;
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (xs[i] != xs[i - 1])
                ++distinct;
        if (distinct < 3)
            throw DomainError("fit_hyperbolic: needs at least 3 distinct x values");
    }

    // Seed: scan pole positions left of the data, solve mag/offset linearly.
    double best_sse = std::numeric_limits<double>::infinity();
    HypCoef seed;
    bool seeded = false;
    for (double fac : {0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const double shift = fac * span - x_min;  // pole at x_min - fac*span
        double su = 0.0, suu = 0.0, sy = 0.0, suy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = 1.0 / (shift + x[i]);
            su += u;
            suu += u * u;
            sy += y[i];
            suy += u * y[i];
        }
        const double nn = static_cast<double>(n);
        const double det = nn * suu - su * su;
        if (std::abs(det) < 1e-30)
            continue;
        const double mag = (nn * suy - su * sy) / det;
        const double off = (sy - mag * su) / nn;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = mag / (shift + x[i]) + off - y[i];
            sse += e * e;
        }
        if (sse < best_sse) {
            best_sse = sse;
            seed = {mag, shift, off};
            seeded = true;
        }
    }
    if (!seeded)
        throw DomainError("fit_hyperbolic: could not seed the fit");

    const double margin = 1e-9 * std::max(1.0, std::abs(x_min));
    auto feasible = [&](const Eigen::VectorXd& p) { return p[1] + x_min > margin; };
    auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        r.resize(static_cast<Eigen::Index>(n));
        if (J)
            J->resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double den = p[1] + x[i];
            const auto k = static_cast<Eigen::Index>(i);
            r[k] = p[0] / den + p[2] - y[i];
            if (J) {
                (*J)(k, 0) = 1.0 / den;
                (*J)(k, 1) = -p[0] / (den * den);
                (*J)(k, 2) = 1.0;
            }
        }
    };

    Eigen::VectorXd p0(3);
    p0 << seed.mag, seed.shift, seed.offset;
    const LmOutcome out = run_lm(p0, eval, feasible, LmOptions{});

    HypFit fit;
    fit.coef = {out.p[0], out.p[1], out.p[2]};
    fit.rmse = std::sqrt(out.cost / static_cast<double>(n));
    fit.converged = out.converged;
    return fit;
}

namespace {

// Coarse seed: plateau line over the middle half, pole positions and
// magnitudes as fixed fractions of the record span.
ModelParams heuristic_guess(const DischargeCurve& c, double start_ratio,
                            double drop_ratio) {
    const std::size_t n = c.size();
    const auto& t = c.time_s;
    const auto& v = c.voltage_v;

    const std::size_t i0 = n / 4, i1 = 3 * n / 4;
    const LinCoef plateau =
        fit_linear(std::span(t).subspan(i0, i1 - i0), std::span(v).subspan(i0, i1 - i0));

    std::vector<double> mid(v.begin() + static_cast<std::ptrdiff_t>(i0),
                            v.begin() + static_cast<std::ptrdiff_t>(i1));
    const std::size_t h = mid.size() / 2;
    std::nth_element(mid.begin(), mid.begin() + static_cast<std::ptrdiff_t>(h), mid.end());

    ModelParams g;
    g.slope = plateau.slope;
    g.offset = mid[h];

    const double span = t.back() - t.front();
    g.start_shift = start_ratio * span;
    g.drop_shift = drop_ratio * span;
    g.start_mag = (v.front() - g.offset) * g.start_shift;
    g.drop_mag = (v.back() - g.offset - g.slope * t.back()) * (g.drop_shift + t.back());
    return g;
}

// Data-driven seed. Residuals against the plateau line isolate the start
// transient at the front and the knee at the back; a two-point solve on each
// places the pole directly. Falls back to the span-ratio heuristics wherever
// the shape does not cooperate.
ModelParams initial_guess(const DischargeCurve& c) {
    const std::size_t n = c.size();
    const auto& t = c.time_s;
    const auto& v = c.voltage_v;

    const std::size_t i0 = n / 4, i1 = 3 * n / 4;
    const LinCoef base =
        fit_linear(std::span(t).subspan(i0, i1 - i0), std::span(v).subspan(i0, i1 - i0));
    auto resid = [&](std::size_t i) { return v[i] - (base.intercept + base.slope * t[i]); };

    const double span = t.back() - t.front();

    ModelParams g;
    g.slope = base.slope;
    g.offset = base.intercept;

    // start term through residuals at the first sample and at ~3% span
    {
        const auto probe = std::lower_bound(t.begin(), t.end(), t.front() + 0.03 * span);
        const auto j = static_cast<std::size_t>(probe - t.begin());
        const double e0 = resid(0);
        const double e1 = j > 0 && j < n ? resid(j) : 0.0;
        if (e0 > e1 && e1 > 0.0) {
            double b = e1 * (t[j] - t.front()) / (e0 - e1);
            b = std::clamp(b, 1e-4 * span, 0.5 * span);
            g.start_shift = b;
            g.start_mag = e0 * (b + t.front());
        } else {
            g.start_shift = 0.05 * span;
            g.start_mag = e0 * g.start_shift;
        }
    }

    // knee term through residuals at the last sample and at ~90% span
    {
        const auto probe = std::lower_bound(t.begin(), t.end(), t.back() - 0.1 * span);
        const auto j = static_cast<std::size_t>(probe - t.begin());
        const double e_end = resid(n - 1);
        const double e2 = j < n - 1 ? resid(j) : 0.0;
        double d = 0.0;
        if (e_end < e2 && e2 < 0.0)
            d = (e2 * t[j] - e_end * t.back()) / (e_end - e2);
        if (d < -1.001 * t.back()) {
            g.drop_shift = d;
            g.drop_mag = e_end * (d + t.back());
        } else {
            g.drop_shift = -1.2 * span;
            g.drop_mag = e_end * (g.drop_shift + t.back());
        }
    }
    return g;
}

} // namespace

FitResult fit_discharge_curve(const DischargeCurve& curve,
                              const std::optional<ModelParams>& init) {
    validate_curve(curve);
    const std::size_t n = curve.size();
    if (n < 12)
        throw DomainError("fit_discharge_curve: needs at least 12 samples");
    if (curve.time_s.front() < 0.0)
        throw DomainError("fit_discharge_curve: needs non-negative times");
    const double T = curve.time_s.back();
    if (!(T > 0.0))
        throw DomainError("fit_discharge_curve: needs a positive time span");

    // Work in normalized time tau = t / T; otherwise J^T J conditioning is
    // hopeless with spans of several thousand seconds.
    std::vector<double> tau(n);
    for (std::size_t i = 0; i < n; ++i)
        tau[i] = curve.time_s[i] / T;
    const auto& v = curve.voltage_v;

    // Constraint region: first pole left of all samples, second pole right of
    // them. Out-of-region initial values are pulled inside.
    const double b_min = 1e-8;
    const double d_max = -(1.0 + 1e-9);

    auto feasible = [&](const Eigen::VectorXd& p) {
        return p[1] > b_min && p[3] < d_max;
    };
    auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        r.resize(static_cast<Eigen::Index>(n));
        if (J)
            J->resize(static_cast<Eigen::Index>(n), 6);
        for (std::size_t i = 0; i < n; ++i) {
            const double db = p[1] + tau[i];
            const double dd = p[3] + tau[i];
            const auto k = static_cast<Eigen::Index>(i);
            r[k] = p[0] / db + p[2] / dd + p[4] * tau[i] + p[5] - v[i];
            if (J) {
                (*J)(k, 0) = 1.0 / db;
                (*J)(k, 1) = -p[0] / (db * db);
                (*J)(k, 2) = 1.0 / dd;
                (*J)(k, 3) = -p[2] / (dd * dd);
                (*J)(k, 4) = tau[i];
                (*J)(k, 5) = 1.0;
            }
        }
    };

    std::vector<ModelParams> seeds;
    if (init) {
        seeds.push_back(*init);
    } else {
        // A caller guess is trusted as-is; otherwise start from the
        // data-driven seed and fall back to a short deterministic ladder of
        // span-ratio seeds when it lands in the wrong basin.
        seeds.push_back(initial_guess(curve));
        for (auto [sr, dr] : {std::pair<double, double>{0.05, -1.2},
                              {0.02, -1.1},
                              {0.10, -1.45},
                              {0.05, -1.8},
                              {0.15, -1.05}})
            seeds.push_back(heuristic_guess(curve, sr, dr));
    }

    bool any = false;
    LmOutcome best;
    auto better = [](const LmOutcome& a, const LmOutcome& b) {
        return a.converged != b.converged ? a.converged : a.cost < b.cost;
    };
    for (const ModelParams& g : seeds) {
        Eigen::VectorXd p0(6);
        p0 << g.start_mag / T, g.start_shift / T, g.drop_mag / T, g.drop_shift / T,
            g.slope * T, g.offset;
        if (!(p0[1] > b_min))
            p0[1] = 0.05;
        if (!(p0[3] < d_max))
            p0[3] = -1.2;
        if (!p0.allFinite())
            continue;
        LmOutcome out = run_lm(p0, eval, feasible, LmOptions{});
        if (!any || better(out, best)) {
            any = true;
            best = std::move(out);
        }
        // A converged seed can still be a local minimum; only an essentially
        // exact fit ends the ladder early.
        if (best.converged && best.cost <= 1e-12 * static_cast<double>(n))
            break;
    }
    if (!any)
        throw DomainError("fit_discharge_curve: initial guess is not finite");

    FitResult res;
    res.params.start_mag = best.p[0] * T;
    res.params.start_shift = best.p[1] * T;
    res.params.drop_mag = best.p[2] * T;
    res.params.drop_shift = best.p[3] * T;
    res.params.slope = best.p[4] / T;
    res.params.offset = best.p[5];
    res.rmse = std::sqrt(best.cost / static_cast<double>(n));
    res.iterations = best.iterations;
    res.converged = best.converged;
    return res;
}

EnvelopePair extract_envelopes(const DischargeCurve& curve, const LoadProgram& prog) {
    validate_curve(curve);
    validate_program(prog);

    const std::uint64_t period_ms = prog.cycle_ms();
    const double period_s = static_cast<double>(period_ms) / 1000.0;

    // Merge consecutive same-state steps into spans within one cycle.
    struct Span {
        bool on;
        std::uint64_t a_ms, b_ms;  // [a, b)
    };
    std::vector<Span> spans;
    std::uint64_t pos = 0;
    for (const auto& s : prog.steps) {
        const bool on = s.level > 0;
        if (!spans.empty() && spans.back().on == on) {
            spans.back().b_ms += s.duration_ms;
        } else {
            spans.push_back({on, pos, pos + s.duration_ms});
        }
        pos += s.duration_ms;
    }

    const Span* last_on = nullptr;
    const Span* last_off = nullptr;
    for (const auto& sp : spans) {
        if (sp.on)
            last_on = &sp;
        else
            last_off = &sp;
    }
    if (!last_on)
        throw DomainError("extract_envelopes: program never applies load");
    if (!last_off)
        throw DomainError("extract_envelopes: program never idles");

    const auto& t = curve.time_s;
    constexpr double kEdgeTol = 1e-7;  // s; samples on a boundary go to the next span

    const auto whole =
        static_cast<std::uint64_t>(std::floor((t.back() + kEdgeTol) / period_s));
    if (whole < 1)
        throw DomainError("extract_envelopes: curve does not cover one program cycle");

    // Last sample strictly inside [a_s, b_s).
    auto pick = [&](double a_s, double b_s, const char* what,
                    std::uint64_t cycle) -> std::size_t {
        auto it = std::upper_bound(t.begin(), t.end(), b_s - kEdgeTol);
        if (it == t.begin())
            throw DomainError(std::string("extract_envelopes: no sample in the ") + what +
                              " span of cycle " + std::to_string(cycle));
        const std::size_t idx = static_cast<std::size_t>(it - t.begin()) - 1;
        if (t[idx] < a_s - kEdgeTol)
            throw DomainError(std::string("extract_envelopes: no sample in the ") + what +
                              " span of cycle " + std::to_string(cycle));
        return idx;
    };

    EnvelopePair env;
    const CycleStats st = cycle_stats(prog);
    for (DischargeCurve* c : {&env.upper, &env.lower}) {
        c->meta = curve.meta;
        c->meta.period_s = period_s;
        c->meta.duty = st.duty;
    }
    env.upper.meta.label = "upper envelope";
    env.lower.meta.label = "lower envelope";

    for (std::uint64_t k = 0; k < whole; ++k) {
        const double base = static_cast<double>(k) * period_s;
        const std::size_t iu =
            pick(base + static_cast<double>(last_off->a_ms) / 1000.0,
                 base + static_cast<double>(last_off->b_ms) / 1000.0, "idle", k);
        const std::size_t il =
            pick(base + static_cast<double>(last_on->a_ms) / 1000.0,
                 base + static_cast<double>(last_on->b_ms) / 1000.0, "load", k);

        env.upper.time_s.push_back(t[iu]);
        env.upper.voltage_v.push_back(curve.voltage_v[iu]);
        env.lower.time_s.push_back(t[il]);
        env.lower.voltage_v.push_back(curve.voltage_v[il]);
        if (curve.has_current()) {
            env.upper.current_ma.push_back(curve.current_ma[iu]);
            env.lower.current_ma.push_back(curve.current_ma[il]);
        }
    }
    return env;
}

} // namespace nimh
