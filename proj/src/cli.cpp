#include "nimh/cli.hpp"

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nimh/analysis.hpp"
#include "nimh/charge_detector.hpp"
#include "nimh/curve_io.hpp"
#include "nimh/dependence.hpp"
#include "nimh/errors.hpp"
#include "nimh/fitting.hpp"
#include "nimh/load_program.hpp"
#include "nimh/model.hpp"
#include "nimh/plot.hpp"
#include "nimh/simulator.hpp"
#include "text_util.hpp"

namespace nimh {

namespace {

struct NoiseOpts {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    CLI::Option* sigma_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* cmd) {
        sigma_opt = cmd->add_option("--noise-sigma", sigma,
                                    "Gaussian voltage noise sigma in volts");
        seed_opt = cmd->add_option("--seed", seed,
                                   "RNG seed, required with --noise-sigma");
    }

    DischargeCurve apply(DischargeCurve curve) const {
        if (sigma_opt->count() == 0)
            return curve;
        if (seed_opt->count() == 0)
            throw CLI::ValidationError("--seed is required when --noise-sigma is given");
        return add_noise(curve, sigma, seed);
    }
};

LoadProgram load_program_file(const std::string& path) {
    try {
        return parse_program_text(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string yes_no(bool b) {
    return b ? "yes" : "no";
}

// depend-fit manifest: `<params-path> L=.. p=.. d=.. T=..` per line, paths
// relative to the manifest location.
std::vector<GridPoint> load_manifest(const std::string& path) {
    const std::string text = read_text_file(path);
    const auto base = std::filesystem::path(path).parent_path();

    std::vector<GridPoint> points;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos)
            nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;

        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        line = line.substr(first);

        std::vector<std::string> toks;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
                ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t')
                ++j;
            if (j > i)
                toks.push_back(line.substr(i, j - i));
            i = j;
        }
        if (toks.empty())
            continue;

        GridPoint pt;
        const auto params_path = base / toks[0];
        pt.params = load_params(params_path.string());
        for (std::size_t k = 1; k < toks.size(); ++k) {
            const auto eq = toks[k].find('=');
            if (eq == std::string::npos)
                throw ParseError(path + ": manifest entries must be axis=value", lineno);
            const std::string key = toks[k].substr(0, eq);
            double v = 0.0;
            if (!detail::parse_number(toks[k].substr(eq + 1), v))
                throw ParseError(path + ": bad number in manifest", lineno);
            if (key == "L")
                pt.cond.load_ma = v;
            else if (key == "p")
                pt.cond.period_s = v;
            else if (key == "d")
                pt.cond.duty = v;
            else if (key == "T")
                pt.cond.temp_c = v;
            else
                throw ParseError(path + ": unknown axis '" + key + "' in manifest", lineno);
        }
        points.push_back(std::move(pt));
    }
    return points;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"NiMH battery discharge modelling toolkit"};
    app.name("nimh");
    app.require_subcommand(1);

    // fit ------------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "Fit the discharge model to a sampled curve");
    struct FitOpts {
        std::string curve, out, init;
    };
    auto fit_opts = std::make_shared<FitOpts>();
    fit->add_option("--curve", fit_opts->curve, "Input curve CSV")->required();
    fit->add_option("--out", fit_opts->out, "Output parameter file")->required();
    auto* fit_init = fit->add_option("--init", fit_opts->init, "Initial-guess parameter file");
    fit->callback([fit_opts, fit_init] {
        const DischargeCurve curve = load_curve(fit_opts->curve);
        std::optional<ModelParams> init;
        if (fit_init->count())
            init = load_params(fit_opts->init);
        const FitResult res = fit_discharge_curve(curve, init);
        if (!res.converged)
            throw DomainError("fit did not converge after " +
                              std::to_string(res.iterations) + " iterations");
        save_params(fit_opts->out, res.params);
        std::cout << "rmse_v=" << detail::fmt_full(res.rmse)
                  << " iterations=" << res.iterations << " converged=yes\n";
    });

    // simulate -------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Sample a constant-load discharge curve");
    struct SimOpts {
        std::string params, out;
        double dt = 1.0, cutoff = 0.9, load_ma = 0.0;
        double rec_duration = 0.0, rec_rest = 1.2, rec_kappa = 60.0;
        NoiseOpts noise;
    };
    auto sim_opts = std::make_shared<SimOpts>();
    sim->add_option("--params", sim_opts->params, "Model parameter file")->required();
    sim->add_option("--out", sim_opts->out, "Output curve CSV")->required();
    sim->add_option("--dt", sim_opts->dt, "Sample interval in seconds")->required();
    sim->add_option("--cutoff", sim_opts->cutoff, "Cutoff voltage in volts")->required();
    auto* sim_load = sim->add_option("--load-ma", sim_opts->load_ma,
                                     "Constant load current for the current column");
    auto* sim_rec = sim->add_option("--recovery-duration", sim_opts->rec_duration,
                                    "Append a rest tail of this many seconds");
    sim->add_option("--recovery-rest", sim_opts->rec_rest, "Rest-tail target voltage");
    sim->add_option("--recovery-kappa", sim_opts->rec_kappa, "Rest-tail time constant");
    sim_opts->noise.attach(sim);
    sim->callback([sim_opts, sim_load, sim_rec] {
        const ModelParams params = load_params(sim_opts->params);
        std::optional<double> load;
        if (sim_load->count())
            load = sim_opts->load_ma;
        std::optional<RecoveryOptions> rec;
        if (sim_rec->count())
            rec = RecoveryOptions{sim_opts->rec_rest, sim_opts->rec_duration,
                                  sim_opts->rec_kappa};
        DischargeCurve curve = simulate_constant(params, sim_opts->dt, sim_opts->cutoff,
                                                 load, rec);
        save_curve(sim_opts->out, sim_opts->noise.apply(std::move(curve)));
    });

    // pulse-sim ------------------------------------------------------------
    auto* pulse = app.add_subcommand("pulse-sim", "Sample a pulsed discharge curve");
    struct PulseOpts {
        std::string upper, lower, program, out;
        double dt = 1.0, cutoff = 0.9;
        double r0 = 0.100, r_end = 0.300, r_knee = 0.95;
        double kappa_on = 5.0, kappa_off = 5.0;
        NoiseOpts noise;
    };
    auto pulse_opts = std::make_shared<PulseOpts>();
    pulse->add_option("--upper", pulse_opts->upper, "Upper-envelope parameter file")->required();
    pulse->add_option("--lower", pulse_opts->lower, "Lower-envelope parameter file")->required();
    pulse->add_option("--program", pulse_opts->program, "Load program file")->required();
    pulse->add_option("--out", pulse_opts->out, "Output curve CSV")->required();
    pulse->add_option("--dt", pulse_opts->dt, "Sample interval in seconds")->required();
    pulse->add_option("--cutoff", pulse_opts->cutoff, "Cutoff voltage in volts")->required();
    pulse->add_option("--r0", pulse_opts->r0, "Internal resistance before the knee, ohm");
    pulse->add_option("--r-end", pulse_opts->r_end, "Internal resistance at end of life, ohm");
    pulse->add_option("--r-knee", pulse_opts->r_knee, "Discharged fraction where the rise starts");
    pulse->add_option("--kappa-on", pulse_opts->kappa_on, "Switch-on relaxation constant, s");
    pulse->add_option("--kappa-off", pulse_opts->kappa_off, "Switch-off relaxation constant, s");
    pulse_opts->noise.attach(pulse);
    pulse->callback([pulse_opts] {
        EnvelopeModel env;
        env.upper = load_params(pulse_opts->upper);
        env.lower = load_params(pulse_opts->lower);
        env.r_int = {pulse_opts->r0, pulse_opts->r_end, pulse_opts->r_knee};
        env.kappa_on_s = pulse_opts->kappa_on;
        env.kappa_off_s = pulse_opts->kappa_off;
        const LoadProgram prog = load_program_file(pulse_opts->program);
        DischargeCurve curve =
            simulate_pulsing(env, prog, pulse_opts->dt, pulse_opts->cutoff);
        save_curve(pulse_opts->out, pulse_opts->noise.apply(std::move(curve)));
    });

    // charge-sim -----------------------------------------------------------
    auto* charge = app.add_subcommand("charge-sim", "Sample a constant-current charge curve");
    struct ChargeOpts {
        std::string out;
        double dt = 1.0, total = 0.0;
        double v_start = 1.5, v_peak = 1.7, t_peak = 3600.0;
        double decline_mv_per_min = 2.0, knee = 6.0, charge_ma = 500.0;
        NoiseOpts noise;
    };
    auto charge_opts = std::make_shared<ChargeOpts>();
    charge->add_option("--out", charge_opts->out, "Output curve CSV")->required();
    charge->add_option("--dt", charge_opts->dt, "Sample interval in seconds")->required();
    charge->add_option("--total", charge_opts->total, "Total charge time in seconds")->required();
    charge->add_option("--v-start", charge_opts->v_start, "Voltage at the start of charge");
    charge->add_option("--v-peak", charge_opts->v_peak, "Peak voltage");
    charge->add_option("--t-peak", charge_opts->t_peak, "Time of the peak in seconds");
    charge->add_option("--decline-mv-per-min", charge_opts->decline_mv_per_min,
                       "Post-peak decline in mV per minute");
    charge->add_option("--knee", charge_opts->knee, "Rise sharpness (0 = linear ramp)");
    charge->add_option("--charge-ma", charge_opts->charge_ma, "Charge current column value");
    charge_opts->noise.attach(charge);
    charge->callback([charge_opts] {
        ChargeProfile profile;
        profile.v_start = charge_opts->v_start;
        profile.v_peak = charge_opts->v_peak;
        profile.t_peak_s = charge_opts->t_peak;
        profile.decline_v_per_s = charge_opts->decline_mv_per_min / 1000.0 / 60.0;
        profile.knee_sharpness = charge_opts->knee;
        profile.charge_ma = charge_opts->charge_ma;
        DischargeCurve curve = simulate_charge(profile, charge_opts->dt, charge_opts->total);
        save_curve(charge_opts->out, charge_opts->noise.apply(std::move(curve)));
    });

    // detect ---------------------------------------------------------------
    auto* detect = app.add_subcommand("detect", "Run the end-of-charge detector on a curve");
    struct DetectOpts {
        std::string curve, config;
    };
    auto detect_opts = std::make_shared<DetectOpts>();
    detect->add_option("--curve", detect_opts->curve, "Charge curve CSV")->required();
    auto* detect_cfg = detect->add_option("--config", detect_opts->config,
                                          "Detector configuration file");
    detect->callback([detect_opts, detect_cfg] {
        DetectorConfig cfg;
        if (detect_cfg->count()) {
            try {
                cfg = parse_detector_config(read_text_file(detect_opts->config));
            } catch (const ParseError& e) {
                throw ParseError(detect_opts->config + ": " + e.what());
            }
        }
        const DischargeCurve curve = load_curve(detect_opts->curve);
        const DetectionResult res = run_detector(curve, cfg);
        if (res.t_terminate_s)
            std::cout << detail::fmt_full(*res.t_terminate_s) << "\n";
        else
            std::cout << "none\n";
    });

    // envelope -------------------------------------------------------------
    auto* envelope = app.add_subcommand("envelope", "Extract per-cycle envelopes");
    struct EnvOpts {
        std::string curve, program, upper_out, lower_out;
    };
    auto env_opts = std::make_shared<EnvOpts>();
    envelope->add_option("--curve", env_opts->curve, "Pulsed curve CSV")->required();
    envelope->add_option("--program", env_opts->program, "Load program file")->required();
    envelope->add_option("--upper-out", env_opts->upper_out, "Upper envelope CSV")->required();
    envelope->add_option("--lower-out", env_opts->lower_out, "Lower envelope CSV")->required();
    envelope->callback([env_opts] {
        const DischargeCurve curve = load_curve(env_opts->curve);
        const LoadProgram prog = load_program_file(env_opts->program);
        const EnvelopePair pair = extract_envelopes(curve, prog);
        save_curve(env_opts->upper_out, pair.upper);
        save_curve(env_opts->lower_out, pair.lower);
    });

    // depend-fit -----------------------------------------------------------
    auto* depfit = app.add_subcommand("depend-fit", "Build the condition-dependence model");
    struct DepOpts {
        std::string manifest, out;
    };
    auto dep_opts = std::make_shared<DepOpts>();
    depfit->add_option("--manifest", dep_opts->manifest,
                       "Listing of parameter files with their conditions")->required();
    depfit->add_option("--out", dep_opts->out, "Output dependence file")->required();
    depfit->callback([dep_opts] {
        const auto points = load_manifest(dep_opts->manifest);
        const DependenceModel model = build_dependence_model(points);
        write_text_file(dep_opts->out, serialize_dependence(model));
    });

    // predict --------------------------------------------------------------
    auto* predict = app.add_subcommand("predict", "Predict parameters for an operating point");
    struct PredOpts {
        std::string model, out;
        double load_ma = 0.0, period = 0.0, duty = 0.0, temp = 0.0;
    };
    auto pred_opts = std::make_shared<PredOpts>();
    predict->add_option("--model", pred_opts->model, "Dependence file")->required();
    predict->add_option("--out", pred_opts->out, "Output parameter file")->required();
    predict->add_option("--load-ma", pred_opts->load_ma, "Load current")->required();
    predict->add_option("--period", pred_opts->period, "Pulse period in seconds")->required();
    predict->add_option("--duty", pred_opts->duty, "Duty cycle 0..1")->required();
    auto* pred_temp = predict->add_option("--temp", pred_opts->temp, "Temperature in Celsius");
    predict->callback([pred_opts, pred_temp] {
        DependenceModel model;
        try {
            model = parse_dependence(read_text_file(pred_opts->model));
        } catch (const ParseError& e) {
            throw ParseError(pred_opts->model + ": " + e.what());
        }
        std::optional<double> temp;
        if (pred_temp->count())
            temp = pred_opts->temp;
        const PredictedParams pred = predict_params(model, pred_opts->load_ma,
                                                    pred_opts->period, pred_opts->duty, temp);
        save_params(pred_opts->out, pred.params);
        std::cout << "extrapolated=" << yes_no(pred.extrapolated)
                  << " within_validity=" << yes_no(pred.within_validity) << "\n";
        for (const auto& note : pred.notes)
            std::cout << "note: " << note << "\n";
    });

    // capacity -------------------------------------------------------------
    auto* capacity = app.add_subcommand("capacity", "Integrate delivered charge");
    struct CapOpts {
        std::string curve;
        double cutoff = 0.9;
    };
    auto cap_opts = std::make_shared<CapOpts>();
    capacity->add_option("--curve", cap_opts->curve, "Curve CSV with a current column")->required();
    capacity->add_option("--cutoff", cap_opts->cutoff, "Cutoff voltage, default 0.9");
    capacity->callback([cap_opts] {
        const DischargeCurve curve = load_curve(cap_opts->curve);
        const CapacityReport rep = integrate_capacity(curve, cap_opts->cutoff);
        std::cout << "charge_mah=" << detail::fmt_full(rep.charge_mah)
                  << " duration_s=" << detail::fmt_full(rep.duration_s)
                  << " cutoff_reached=" << yes_no(rep.cutoff_reached) << "\n";
    });

    // derivative -----------------------------------------------------------
    auto* derivative = app.add_subcommand("derivative", "Smoothed dV/dt of a curve");
    struct DerOpts {
        std::string curve, out;
        std::size_t window = 1;
    };
    auto der_opts = std::make_shared<DerOpts>();
    derivative->add_option("--curve", der_opts->curve, "Input curve CSV")->required();
    derivative->add_option("--out", der_opts->out, "Output CSV (derivative in the voltage column)")
        ->required();
    derivative->add_option("--window", der_opts->window, "Odd smoothing window, default 1");
    derivative->callback([der_opts] {
        const DischargeCurve curve = load_curve(der_opts->curve);
        const DischargeCurve d = derivative_curve(curve, der_opts->window);
        write_text_file(der_opts->out, format_curve_csv(d));
    });

    // phases ---------------------------------------------------------------
    auto* phases = app.add_subcommand("phases", "Segment a discharge curve into phases");
    struct PhOpts {
        std::string curve;
    };
    auto ph_opts = std::make_shared<PhOpts>();
    phases->add_option("--curve", ph_opts->curve, "Input curve CSV")->required();
    phases->callback([ph_opts] {
        const DischargeCurve curve = load_curve(ph_opts->curve);
        const PhaseBoundaries b = segment_phases(curve);
        std::cout << "t_init_end=" << detail::fmt_full(b.t_init_end)
                  << " t_hold_end=" << detail::fmt_full(b.t_hold_end)
                  << " t_cutoff=" << detail::fmt_full(b.t_cutoff) << " t_recovery_end="
                  << (b.t_recovery_end ? detail::fmt_full(*b.t_recovery_end) : "none")
                  << " degenerate=" << yes_no(b.degenerate) << "\n";
    });

    // plot -----------------------------------------------------------------
    auto* plot = app.add_subcommand("plot", "Render curves to SVG");
    struct PlotOpts {
        std::vector<std::string> curves;
        std::string out;
        std::string x_label = "time [s]";
        std::string y_label = "voltage [mV]";
    };
    auto plot_opts = std::make_shared<PlotOpts>();
    plot->add_option("--curve", plot_opts->curves, "Curve CSV, repeatable")
        ->required()
        ->take_all();
    plot->add_option("--out", plot_opts->out, "Output SVG path")->required();
    plot->add_option("--x-label", plot_opts->x_label, "X axis caption");
    plot->add_option("--y-label", plot_opts->y_label, "Y axis caption");
    plot->callback([plot_opts] {
        std::vector<DischargeCurve> curves;
        curves.reserve(plot_opts->curves.size());
        for (const auto& path : plot_opts->curves)
            curves.push_back(load_curve(path));
        write_text_file(plot_opts->out,
                        render_svg(curves, plot_opts->x_label, plot_opts->y_label));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace nimh
