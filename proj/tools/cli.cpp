#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "co2occ/baseline.hpp"
#include "co2occ/experiment.hpp"
#include "co2occ/inference.hpp"
#include "co2occ/model_io.hpp"

namespace co2occ::cli {

namespace {

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
    try {
        return fn();
    } catch (const IoError& e) {
        log << "error: " << e.what() << '\n';
        return kIo;
    } catch (const ValidationError& e) {
        log << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const NumericalError& e) {
        log << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kNumerical;
    }
}

ExperimentConfig load_config(const std::optional<std::string>& path) {
    return path ? ExperimentConfig::load(*path) : ExperimentConfig{};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentConfig cfg = load_config(args.config);
        if (args.seed) cfg.simulation.seed = *args.seed;
        const auto& sim = cfg.simulation;

        const Schedule schedule =
            random_schedule(cfg.physics, sim.total_minutes, sim.mean_dwell,
                            sim.regime_mean_dwell, derive_seed(sim.seed, 1));
        const LabeledTrace trace =
            simulate(cfg.physics, schedule, sim.y0, sim.noise_sd, derive_seed(sim.seed, 2));
        save_trace_csv(args.out, trace, cfg.physics.ambient_co2);
        cfg.to_document().save(args.out + ".config");

        log << "wrote " << trace.series.size() << " samples (" << schedule.steps.size()
            << " schedule segments, " << trace.clamp_count << " clamped) to " << args.out << '\n';
        return kOk;
    });
}

int cmd_fit(const FitArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentConfig cfg = load_config(args.config);
        std::optional<SwitchingARModel> init;
        if (args.init_model) {
            init = load_model(*args.init_model);
            cfg.physics = init->physics();
        }
        if (args.ambient) cfg.physics.ambient_co2 = *args.ambient;
        cfg.validate();

        const LoadedTrace loaded = load_series(args.trace, cfg.physics.ambient_co2);
        if (std::abs(loaded.series.dt() - cfg.physics.dt) > 1e-6 * cfg.physics.dt) {
            throw ValidationError("trace sampling interval " + format_double(loaded.series.dt()) +
                                  " min does not match physics.dt " +
                                  format_double(cfg.physics.dt));
        }
        if (loaded.clamped > 0) {
            log << "warning: " << loaded.clamped << " readings below ambient clamped to 0\n";
        }

        const FitReport report =
            fit_configured(cfg.fit, cfg.physics, loaded.series, init ? &*init : nullptr);
        save_model(args.out, report.final_model);

        std::ostringstream text;
        write_fit_report_text(text, report);
        if (loaded.truth) {
            const MetricsReport m =
                score(report.final_path, *loaded.truth, cfg.physics.max_occupancy, cfg.physics.dt,
                      cfg.physics.num_regimes() > 1);
            text << "occupancy_accuracy_vs_labels: " << m.accuracy << '\n';
        }
        text << "\n# resolved config\n";
        cfg.to_document().write(text);
        if (args.report) write_text(*args.report, text.str());
        if (args.loglik_csv) {
            auto out = open_out(*args.loglik_csv);
            write_loglik_csv(out, report.loglik_trace);
        }
        if (args.json_report) write_text(*args.json_report, fit_report_to_json(report) + "\n");

        for (const auto& w : report.warnings) log << "warning: " << w << '\n';
        log << "fit " << (report.converged ? "converged" : "stopped") << " after "
            << report.iterations << " iterations; model written to " << args.out << '\n';
        return kOk;
    });
}

int cmd_decode(const DecodeArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        const SwitchingARModel model = load_model(args.model);
        const double ambient = args.ambient.value_or(model.physics().ambient_co2);
        const LoadedTrace loaded = load_series(args.trace, ambient);
        if (std::abs(loaded.series.dt() - model.physics().dt) > 1e-6 * model.physics().dt) {
            throw ValidationError("trace sampling interval does not match model dt");
        }
        if (loaded.truth) {
            for (const StateLabel& s : *loaded.truth) {
                if (s.occupancy > model.physics().max_occupancy ||
                    static_cast<std::size_t>(s.regime) >= model.physics().num_regimes()) {
                    throw ValidationError(
                        "trace labels (occupancy " + std::to_string(s.occupancy) + ", regime " +
                        std::to_string(s.regime) + ") do not fit the model's " +
                        std::to_string(model.num_states()) + "-state space");
                }
            }
        }

        const Decoding decoded = viterbi(model, loaded.series);
        const Posteriors post = forward_backward(model, loaded.series);
        std::vector<double> pmax(decoded.path.size());
        for (std::size_t t = 0; t < pmax.size(); ++t) {
            const auto row = post.posterior.q.row(t);
            pmax[t] = *std::max_element(row.begin(), row.end());
        }
        save_decoded_csv(args.out, decoded.path, loaded.series, pmax);
        log << "decoded " << decoded.path.size() << " steps, log-probability "
            << format_double(decoded.log_prob) << "; written to " << args.out << '\n';
        return kOk;
    });
}

int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& log) {
    return guarded(log, [&] {
        const auto rows = load_decoded_csv(args.decoded);
        const LoadedTrace trace = load_series(args.trace, 0.0);
        if (!trace.truth) throw ValidationError(args.trace + ": no occupancy column to score against");
        const auto& truth = *trace.truth;
        if (rows.size() != truth.size()) {
            throw ValidationError("decoded file has " + std::to_string(rows.size()) +
                                  " rows, trace has " + std::to_string(truth.size()) +
                                  " labelled steps");
        }
        DecodedPath path;
        int max_occ = 0;
        const auto ts = trace.series.timestamps();
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (std::abs(rows[t].timestamp - ts[t]) > 1e-6 * std::max(1.0, std::abs(ts[t]))) {
                throw ValidationError("decoded row " + std::to_string(t + 1) +
                                      " timestamp does not match the trace");
            }
            path.states.push_back(rows[t].state);
            path.occupancy.push_back(rows[t].occupancy);
            path.regime.push_back(rows[t].regime);
            max_occ = std::max({max_occ, rows[t].occupancy, truth[t].occupancy});
        }
        if (args.max_occupancy) max_occ = *args.max_occupancy;

        std::ifstream header_probe(args.trace);
        std::string header;
        std::getline(header_probe, header);
        const bool has_regime = header.find("regime") != std::string::npos;

        const MetricsReport report = score(path, truth, max_occ, trace.series.dt(), has_regime);
        write_metrics_text(out, report);
        if (args.json_report) write_text(*args.json_report, metrics_to_json(report) + "\n");
        return kOk;
    });
}

int cmd_sweep(const SweepArgs& args, std::ostream& log) {
    return guarded(log, [&] {
        ExperimentConfig cfg = load_config(args.config);
        if (args.seed) cfg.sweep.seed = *args.seed;
        if (args.trials) cfg.sweep.trials = *args.trials;
        cfg.validate();

        const auto rows = ventilation_sweep(cfg.sweep.taus, cfg.sweep.trials, cfg, cfg.sweep.seed);
        auto out = open_out(args.out);
        write_sweep_csv(out, rows);
        cfg.to_document().save(args.out + ".config");
        log << "sweep over " << rows.size() << " ventilation times written to " << args.out
            << '\n';
        return kOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
    CLI::App app{"Occupancy estimation from CO2 time series with a switching AR model"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a labelled CO2 trace");
    simulate->add_option("--config", sim.config, "Experiment config file");
    simulate->add_option("--out", sim.out, "Output trace CSV")->required();
    simulate->add_option("--seed", sim.seed, "Override simulation.seed");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the switching AR model (EM-Viterbi)");
    fit_cmd->add_option("--trace", fit.trace, "Input trace CSV")->required();
    fit_cmd->add_option("--config", fit.config, "Experiment config file");
    fit_cmd->add_option("--out", fit.out, "Output model file")->required();
    fit_cmd->add_option("--init", fit.init_model, "Start from a saved model");
    fit_cmd->add_option("--ambient", fit.ambient, "Ambient CO2 (ppm)");
    fit_cmd->add_option("--report", fit.report, "Plain-text fit summary");
    fit_cmd->add_option("--loglik", fit.loglik_csv, "CSV of the log-likelihood trace");
    fit_cmd->add_option("--json-report", fit.json_report, "Machine-readable fit report");

    DecodeArgs dec;
    auto* decode = app.add_subcommand("decode", "Decode occupancy with a fitted model");
    decode->add_option("--model", dec.model, "Model file")->required();
    decode->add_option("--trace", dec.trace, "Input trace CSV")->required();
    decode->add_option("--out", dec.out, "Output decoded CSV")->required();
    decode->add_option("--ambient", dec.ambient, "Ambient CO2 (ppm), overrides the model's");

    ScoreArgs sc;
    auto* score_cmd = app.add_subcommand("score", "Score a decoded path against labels");
    score_cmd->add_option("--decoded", sc.decoded, "Decoded CSV")->required();
    score_cmd->add_option("--trace", sc.trace, "Labelled trace CSV")->required();
    score_cmd->add_option("--max-occupancy", sc.max_occupancy, "Confusion matrix size - 1");
    score_cmd->add_option("--json-report", sc.json_report, "Machine-readable metrics");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Ventilation-time sweep, both models");
    sweep->add_option("--config", sw.config, "Experiment config file");
    sweep->add_option("--out", sw.out, "Output sweep CSV")->required();
    sweep->add_option("--seed", sw.seed, "Override sweep.seed");
    sweep->add_option("--trials", sw.trials, "Override sweep.trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        log << "error: " << e.what() << '\n';
        return kValidation;
    }

    if (simulate->parsed()) return cmd_simulate(sim, log);
    if (fit_cmd->parsed()) return cmd_fit(fit, log);
    if (decode->parsed()) return cmd_decode(dec, log);
    if (score_cmd->parsed()) return cmd_score(sc, out, log);
    return cmd_sweep(sw, log);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
    std::vector<const char*> argv;
    argv.push_back("co2occ");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, log);
}

}  // namespace co2occ::cli
