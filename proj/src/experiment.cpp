#include "co2occ/experiment.hpp"

#include <bit>
#include <future>
#include <ostream>

#include "co2occ/model_io.hpp"

namespace co2occ {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t read_seed(const KeyValueDocument& doc, const char* section, std::uint64_t fallback) {
    const long long v = doc.get_int(section, "seed", static_cast<long long>(fallback));
    if (v < 0) throw ValidationError(std::string(section) + ".seed must be >= 0");
    return static_cast<std::uint64_t>(v);
}

std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace

// =============================================================================
// Config
// =============================================================================

ExperimentConfig ExperimentConfig::from_document(const KeyValueDocument& doc) {
    ExperimentConfig cfg;

    // [physics] falls back to the experiment defaults, not PhysicsConfig's.
    KeyValueDocument physics_doc;
    write_physics(physics_doc, cfg.physics);
    if (const auto* s = doc.section("physics")) {
        for (const auto& e : s->entries) physics_doc.set("physics", e.key, e.value);
    }
    cfg.physics = read_physics(physics_doc);

    auto& sim = cfg.simulation;
    sim.total_minutes = doc.get_double("simulation", "total_minutes", sim.total_minutes);
    sim.mean_dwell = doc.get_double("simulation", "mean_dwell", sim.mean_dwell);
    sim.regime_mean_dwell =
        doc.get_double("simulation", "regime_mean_dwell", sim.regime_mean_dwell);
    sim.y0 = doc.get_double("simulation", "y0", sim.y0);
    sim.noise_sd = doc.get_double("simulation", "noise_sd", sim.noise_sd);
    sim.seed = read_seed(doc, "simulation", sim.seed);

    auto& fit = cfg.fit;
    auto& o = fit.options;
    o.max_iters = static_cast<int>(doc.get_int("fit", "max_iters", o.max_iters));
    o.tol = doc.get_double("fit", "tol", o.tol);
    o.tie_c_by_regime = doc.get_bool("fit", "tie_c_by_regime", o.tie_c_by_regime);
    o.tie_sigma_global = doc.get_bool("fit", "tie_sigma_global", o.tie_sigma_global);
    o.min_state_weight = doc.get_double("fit", "min_state_weight", o.min_state_weight);
    o.transition_smoothing = doc.get_double("fit", "transition_smoothing", o.transition_smoothing);
    o.extrapolate_starved = doc.get_bool("fit", "extrapolate_starved", o.extrapolate_starved);
    o.factorize_transitions =
        doc.get_bool("fit", "factorize_transitions", o.factorize_transitions);
    if (const auto v = doc.find("fit", "sigma0"); v && *v != "auto") {
        fit.sigma0 = doc.get_double("fit", "sigma0");
    }
    fit.self_stay = doc.get_double("fit", "self_stay", fit.self_stay);
    o.linear_drift = doc.get_bool("fit", "linear_drift", o.linear_drift);
    if (doc.find("fit", "drift_scales")) fit.drift_scales = doc.get_doubles("fit", "drift_scales");

    auto& sweep = cfg.sweep;
    if (doc.find("sweep", "taus")) sweep.taus = doc.get_doubles("sweep", "taus");
    sweep.trials = static_cast<int>(doc.get_int("sweep", "trials", sweep.trials));
    sweep.seed = read_seed(doc, "sweep", sweep.seed);

    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_document(KeyValueDocument::load(path));
}

KeyValueDocument ExperimentConfig::to_document() const {
    KeyValueDocument doc;
    write_physics(doc, physics);
    doc.set("simulation", "total_minutes", format_double(simulation.total_minutes));
    doc.set("simulation", "mean_dwell", format_double(simulation.mean_dwell));
    doc.set("simulation", "regime_mean_dwell", format_double(simulation.regime_mean_dwell));
    doc.set("simulation", "y0", format_double(simulation.y0));
    doc.set("simulation", "noise_sd", format_double(simulation.noise_sd));
    doc.set("simulation", "seed", std::to_string(simulation.seed));

    const auto& o = fit.options;
    doc.set("fit", "max_iters", std::to_string(o.max_iters));
    doc.set("fit", "tol", format_double(o.tol));
    doc.set("fit", "tie_c_by_regime", flag(o.tie_c_by_regime));
    doc.set("fit", "tie_sigma_global", flag(o.tie_sigma_global));
    doc.set("fit", "min_state_weight", format_double(o.min_state_weight));
    doc.set("fit", "transition_smoothing", format_double(o.transition_smoothing));
    doc.set("fit", "extrapolate_starved", flag(o.extrapolate_starved));
    doc.set("fit", "factorize_transitions", flag(o.factorize_transitions));
    doc.set("fit", "sigma0", fit.sigma0 ? format_double(*fit.sigma0) : "auto");
    doc.set("fit", "self_stay", format_double(fit.self_stay));
    doc.set("fit", "linear_drift", flag(o.linear_drift));
    doc.set("fit", "drift_scales", format_doubles(fit.drift_scales));

    doc.set("sweep", "taus", format_doubles(sweep.taus));
    doc.set("sweep", "trials", std::to_string(sweep.trials));
    doc.set("sweep", "seed", std::to_string(sweep.seed));
    return doc;
}

void ExperimentConfig::validate() const {
    physics.validate();
    const auto& s = simulation;
    if (!(s.total_minutes >= physics.dt)) {
        throw ValidationError("simulation.total_minutes must be >= physics.dt");
    }
    if (!(s.mean_dwell > 0.0)) throw ValidationError("simulation.mean_dwell must be > 0");
    if (!(s.total_minutes >= s.mean_dwell)) {
        throw ValidationError("simulation.total_minutes must be >= simulation.mean_dwell");
    }
    if (!(s.regime_mean_dwell > 0.0)) {
        throw ValidationError("simulation.regime_mean_dwell must be > 0");
    }
    if (!(s.y0 >= 0.0)) throw ValidationError("simulation.y0 must be >= 0");
    if (!(s.noise_sd >= 0.0)) throw ValidationError("simulation.noise_sd must be >= 0");
    fit.options.validate();
    if (fit.sigma0 && !(*fit.sigma0 > 0.0)) throw ValidationError("fit.sigma0 must be > 0");
    if (!(fit.self_stay > 0.0 && fit.self_stay < 1.0)) {
        throw ValidationError("fit.self_stay must lie in (0, 1)");
    }
    if (fit.drift_scales.empty()) throw ValidationError("fit.drift_scales must not be empty");
    for (double g : fit.drift_scales) {
        if (!(g > 0.0)) throw ValidationError("fit.drift_scales: every scale must be > 0");
    }
    if (sweep.taus.empty()) throw ValidationError("sweep.taus must not be empty");
    for (double tau : sweep.taus) {
        if (!(tau > 0.0)) throw ValidationError("sweep.taus: every tau must be > 0");
    }
    if (sweep.trials < 1) throw ValidationError("sweep.trials must be >= 1");
}

// =============================================================================
// Harness
// =============================================================================

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

double initial_sigma(const FitSettings& fit, const ObservationSeries& series) {
    return fit.sigma0 ? *fit.sigma0 : estimate_noise_scale(series);
}

FitReport fit_configured(const FitSettings& fit, const PhysicsConfig& physics,
                         const ObservationSeries& series, const SwitchingARModel* init) {
    const SwitchingARModel model0 =
        init ? SwitchingARModel(physics, init->params())
             : init_from_physics(physics, build_state_space(physics), initial_sigma(fit, series),
                                 fit.self_stay);
    return fit_em_viterbi_restarts(model0, series, fit.drift_scales, fit.options);
}

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed) {
    const auto& sim = config.simulation;
    const PhysicsConfig& physics = config.physics;

    const Schedule schedule = random_schedule(physics, sim.total_minutes, sim.mean_dwell,
                                              sim.regime_mean_dwell, derive_seed(seed, 1));
    LabeledTrace trace = simulate(physics, schedule, sim.y0, sim.noise_sd, derive_seed(seed, 2));

    FitReport fit = fit_configured(config.fit, physics, trace.series);
    SimpleHmmFit baseline =
        fit_simple_hmm(trace.series, static_cast<std::size_t>(physics.max_occupancy + 1),
                       config.fit.options, config.fit.self_stay);

    const bool regimes = physics.num_regimes() > 1;
    MetricsReport msar = score(fit.final_path, trace.truth, physics.max_occupancy, physics.dt,
                               regimes);
    MetricsReport hmm = score(baseline.path, trace.truth, physics.max_occupancy, physics.dt);
    return {std::move(trace), std::move(fit), std::move(baseline), std::move(msar),
            std::move(hmm)};
}

std::vector<SweepRow> ventilation_sweep(const std::vector<double>& taus, int trials,
                                        const ExperimentConfig& base, std::uint64_t seed) {
    if (trials < 1) throw ValidationError("sweep: trials must be >= 1");
    if (taus.empty()) throw ValidationError("sweep: no ventilation times given");

    std::vector<SweepRow> rows;
    for (double tau : taus) {
        ExperimentConfig cfg = base;
        cfg.physics.regimes = {tau};
        cfg.validate();

        std::vector<std::future<std::pair<double, double>>> jobs;
        for (int trial = 0; trial < trials; ++trial) {
            const std::uint64_t trial_seed =
                derive_seed(seed, std::bit_cast<std::uint64_t>(tau), static_cast<std::uint64_t>(trial));
            jobs.push_back(std::async(std::launch::async, [cfg, trial_seed] {
                const TrialResult r = run_trial(cfg, trial_seed);
                return std::pair{r.msar.accuracy, r.hmm.accuracy};
            }));
        }
        SweepRow row{tau, 0.0, 0.0, trials};
        for (auto& job : jobs) {
            const auto [msar, hmm] = job.get();
            row.acc_msar += msar;
            row.acc_hmm += hmm;
        }
        row.acc_msar /= trials;
        row.acc_hmm /= trials;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "tau_min,acc_msar,acc_hmm,trials\n";
    for (const auto& r : rows) {
        out << format_double(r.tau) << ',' << format_double(r.acc_msar) << ','
            << format_double(r.acc_hmm) << ',' << r.trials << '\n';
    }
}

}  // namespace co2occ
