#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "nimh/errors.hpp"
#include "nimh/fitting.hpp"
#include "nimh/simulator.hpp"

using namespace nimh;
using testutil::Rng;

namespace {

const ModelParams kCanonical{6.0, 60.0, 60.0, -6000.0, -1e-5, 1.25};

double max_pointwise_gap(const ModelParams& a, const ModelParams& b,
                         const std::vector<double>& times) {
    double worst = 0.0;
    for (double t : times)
        worst = std::max(worst, std::abs(eval_model(a, t) - eval_model(b, t)));
    return worst;
}

} // namespace

TEST_CASE("linear fit is exact on collinear data") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.5, 10.0};
    std::vector<double> y;
    for (double xi : x)
        y.push_back(2.0 * xi - 1.0);
    const LinCoef c = fit_linear(x, y);
    CHECK(c.slope == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.intercept == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("linear fit input validation") {
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(fit_linear(one, one), DomainError);
    const std::vector<double> same{2.0, 2.0, 2.0};
    CHECK_THROWS_AS(fit_linear(same, same), DomainError);
    const std::vector<double> x{1.0, 2.0};
    const std::vector<double> y{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(fit_linear(x, y), DomainError);
}

TEST_CASE("hyperbolic fit recovers exact synthetic coefficients") {
    const double mag = -2600.0, shift = 120.0, offset = -1500.0;
    std::vector<double> x{40.0, 80.0, 150.0, 250.0, 400.0, 600.0, 800.0};
    std::vector<double> y;
    double scale = 0.0;
    for (double xi : x) {
        y.push_back(mag / (shift + xi) + offset);
        scale = std::max(scale, std::abs(y.back()));
    }
    const HypFit fit = fit_hyperbolic(x, y);
    REQUIRE(fit.converged);
    CHECK(fit.rmse <= 1e-8 * scale);
    CHECK(fit.coef.mag == doctest::Approx(mag).epsilon(1e-5));
    CHECK(fit.coef.shift == doctest::Approx(shift).epsilon(1e-5));
    CHECK(fit.coef.offset == doctest::Approx(offset).epsilon(1e-5));
    // fitted pole stays left of the data
    CHECK(fit.coef.shift + x.front() > 0.0);
}

TEST_CASE("hyperbolic fit nails a minimal three-point data set") {
    // y = 2 / (1 + x), the smallest exactly determined case
    const std::vector<double> x{0.0, 1.0, 3.0};
    const std::vector<double> y{2.0, 1.0, 0.5};
    const HypFit fit = fit_hyperbolic(x, y);
    REQUIRE(fit.converged);
    CHECK(fit.rmse <= 1e-9);
    CHECK(fit.coef.mag == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.coef.shift == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.coef.offset == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("hyperbolic fit input validation") {
    const std::vector<double> x{1.0, 2.0};
    const std::vector<double> y{1.0, 2.0};
    CHECK_THROWS_AS(fit_hyperbolic(x, y), DomainError);
    const std::vector<double> xr{1.0, 1.0, 2.0, 2.0};
    const std::vector<double> yr{1.0, 1.0, 2.0, 2.0};
    CHECK_THROWS_AS(fit_hyperbolic(xr, yr), DomainError);  // only 2 distinct
}

TEST_CASE("model fit reproduces a noiseless curve to well under 0.1 mV") {
    const double t_stop = time_to_cutoff(kCanonical, 0.9);
    const DischargeCurve curve = testutil::sample_curve(kCanonical, 5.0, t_stop);
    const FitResult res = fit_discharge_curve(curve);
    REQUIRE(res.converged);
    CHECK(res.rmse <= 1e-5);
    CHECK(max_pointwise_gap(res.params, kCanonical, curve.time_s) <= 1e-4);
    // constraints held
    CHECK(res.params.start_shift > 0.0);
    CHECK(res.params.drop_shift < -curve.time_s.back());
    CHECK(validate_params(res.params, curve.time_s.back()).valid);
}

TEST_CASE("model fit started at the truth stays at the truth") {
    const double t_stop = time_to_cutoff(kCanonical, 0.9);
    const DischargeCurve curve = testutil::sample_curve(kCanonical, 10.0, t_stop);
    const FitResult res = fit_discharge_curve(curve, kCanonical);
    REQUIRE(res.converged);
    CHECK(res.rmse <= 1e-9);
}

TEST_CASE("model fit holds up under 2 mV of noise") {
    const double t_stop = time_to_cutoff(kCanonical, 0.9);
    const DischargeCurve clean = testutil::sample_curve(kCanonical, 5.0, t_stop);
    const DischargeCurve noisy = add_noise(clean, 2e-3, 0xabcdef12u);
    const FitResult res = fit_discharge_curve(noisy);
    REQUIRE(res.converged);
    double sse = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double e = eval_model(res.params, clean.time_s[i]) - clean.voltage_v[i];
        sse += e * e;
    }
    CHECK(std::sqrt(sse / static_cast<double>(clean.size())) <= 3e-3);
}

TEST_CASE("model fit rejects unusable inputs without touching the solver") {
    DischargeCurve tiny;
    for (int i = 0; i < 11; ++i) {
        tiny.time_s.push_back(i);
        tiny.voltage_v.push_back(1.3 - 0.001 * i);
    }
    CHECK_THROWS_AS(fit_discharge_curve(tiny), DomainError);

    DischargeCurve negative;
    for (int i = 0; i < 20; ++i) {
        negative.time_s.push_back(i - 5.0);
        negative.voltage_v.push_back(1.3 - 0.001 * i);
    }
    CHECK_THROWS_AS(fit_discharge_curve(negative), DomainError);
}

TEST_CASE("model fit survives junk data, reporting instead of throwing") {
    Rng rng(0x5eed0201u);
    DischargeCurve junk;
    for (int i = 0; i < 64; ++i) {
        junk.time_s.push_back(i);
        junk.voltage_v.push_back(rng.uniform(0.9, 1.4));
    }
    FitResult res;
    CHECK_NOTHROW(res = fit_discharge_curve(junk));
    CHECK(std::isfinite(res.rmse));
}

TEST_CASE("envelope extraction picks the end-of-span samples per cycle") {
    LoadProgram prog;
    prog.unit = LoadUnit::MilliAmp;
    prog.steps = {{2000, 100}, {2000, 0}};  // 4 s cycle

    DischargeCurve curve;
    for (int i = 0; i <= 13; ++i) {
        curve.time_s.push_back(i);
        curve.voltage_v.push_back(2.0 - 0.01 * i);  // recognizable per-index values
    }

    const EnvelopePair env = extract_envelopes(curve, prog);
    // 13 s span covers 3 whole cycles; the partial 4th is ignored
    REQUIRE(env.upper.size() == 3);
    REQUIRE(env.lower.size() == 3);
    CHECK(env.lower.time_s == std::vector<double>{1.0, 5.0, 9.0});
    CHECK(env.upper.time_s == std::vector<double>{3.0, 7.0, 11.0});
    CHECK(env.lower.voltage_v[1] == doctest::Approx(2.0 - 0.05).epsilon(1e-12));
    CHECK(env.upper.voltage_v[2] == doctest::Approx(2.0 - 0.11).epsilon(1e-12));
    CHECK(env.upper.meta.period_s == doctest::Approx(4.0));
    CHECK(env.upper.meta.duty == doctest::Approx(0.5));
}

TEST_CASE("envelope extraction handles exactly one cycle") {
    LoadProgram prog;
    prog.unit = LoadUnit::MilliAmp;
    prog.steps = {{2000, 100}, {2000, 0}};
    DischargeCurve curve;
    for (int i = 0; i <= 4; ++i) {
        curve.time_s.push_back(i);
        curve.voltage_v.push_back(1.3);
    }
    const EnvelopePair env = extract_envelopes(curve, prog);
    CHECK(env.upper.size() == 1);
    CHECK(env.lower.size() == 1);
}

TEST_CASE("envelope extraction error cases") {
    LoadProgram prog;
    prog.unit = LoadUnit::MilliAmp;
    prog.steps = {{2000, 100}, {2000, 0}};

    DischargeCurve shorter;
    for (int i = 0; i <= 3; ++i) {
        shorter.time_s.push_back(i);
        shorter.voltage_v.push_back(1.3);
    }
    CHECK_THROWS_AS(extract_envelopes(shorter, prog), DomainError);  // under one cycle

    DischargeCurve coarse;
    coarse.time_s = {0.0, 5.0, 10.0};
    coarse.voltage_v = {1.3, 1.3, 1.3};
    CHECK_THROWS_AS(extract_envelopes(coarse, prog), DomainError);  // span holds no sample

    DischargeCurve fine;
    for (int i = 0; i <= 8; ++i) {
        fine.time_s.push_back(i);
        fine.voltage_v.push_back(1.3);
    }
    LoadProgram all_idle;
    all_idle.steps = {{4000, 0}};
    CHECK_THROWS_AS(extract_envelopes(fine, all_idle), DomainError);
    LoadProgram all_on;
    all_on.steps = {{4000, 9}};
    CHECK_THROWS_AS(extract_envelopes(fine, all_on), DomainError);
}
