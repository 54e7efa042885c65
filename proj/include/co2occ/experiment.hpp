// Experiment configuration and the synthetic benchmark harness.
//
// One sectioned config format ([physics], [simulation], [fit], [sweep]) drives
// simulate, fit and sweep. Every setting has a default; to_document() echoes
// the fully resolved config so outputs record what produced them.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "co2occ/baseline.hpp"
#include "co2occ/core.hpp"
#include "co2occ/estimation.hpp"
#include "co2occ/evalio.hpp"
#include "co2occ/keyvalue.hpp"
#include "co2occ/simulator.hpp"

namespace co2occ {

struct SimulationSettings {
    double total_minutes = 1440.0;
    double mean_dwell = 30.0;          ///< mean occupancy dwell (minutes)
    double regime_mean_dwell = 180.0;  ///< mean ventilation-regime dwell (minutes)
    double y0 = 0.0;                   ///< initial excess CO2 (ppm)
    double noise_sd = 2.0;             ///< process noise (ppm per step)
    std::uint64_t seed = 1;
};

struct FitSettings {
    FitOptions options;
    std::optional<double> sigma0;  ///< initial noise sd; estimated from the data when unset
    double self_stay = 0.95;
    std::vector<double> drift_scales{1.0};  ///< per-regime restart grid, see fit_em_viterbi_restarts
};

struct SweepSettings {
    std::vector<double> taus{10.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0};
    int trials = 5;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    PhysicsConfig physics{400.0, {70.0, 100.0}, 5.0, 1.0, 4};
    SimulationSettings simulation;
    FitSettings fit;
    SweepSettings sweep;

    static ExperimentConfig from_document(const KeyValueDocument& doc);
    static ExperimentConfig load(const std::string& path);
    KeyValueDocument to_document() const;
    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Mixes a base seed with stream identifiers (splitmix64), so every trial owns
/// an independent, reproducible RNG stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// One simulated trace with both models fitted and scored.
struct TrialResult {
    LabeledTrace trace;
    FitReport fit;
    SimpleHmmFit baseline;
    MetricsReport msar;
    MetricsReport hmm;
};

/// Initial sigma for a fit: the configured value, or the robust noise-scale
/// estimate of `series`.
double initial_sigma(const FitSettings& fit, const ObservationSeries& series);

/// Physics-based start (or `init` when given), then EM-Viterbi over the
/// configured restart grid.
FitReport fit_configured(const FitSettings& fit, const PhysicsConfig& physics,
                         const ObservationSeries& series,
                         const SwitchingARModel* init = nullptr);

/// Simulates a random schedule under `config`, fits the switching AR model
/// from its physics-based initialization and the simple HMM, and scores both.

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed);

struct SweepRow {
    double tau = 0.0;
    double acc_msar = 0.0;
    double acc_hmm = 0.0;
    int trials = 0;
};

/// For each tau: `trials` single-regime traces, both models fitted, mean
/// accuracies. Trials run concurrently; results do not depend on scheduling.
std::vector<SweepRow> ventilation_sweep(const std::vector<double>& taus, int trials,
                                        const ExperimentConfig& base, std::uint64_t seed);

/// CSV `tau_min,acc_msar,acc_hmm,trials`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace co2occ
