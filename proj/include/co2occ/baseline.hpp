// Memoryless Gaussian-emission HMM over occupancy levels.
//
// Each state emits y_t ~ N(mean, sd^2) independently of y_{t-1}. This is the
// comparator for the switching AR model: it shares the Viterbi core but has no
// notion of CO2 build-up, so its decoded occupancy lags the truth when
// ventilation is slow.
#pragma once

#include <vector>

#include "co2occ/core.hpp"
#include "co2occ/estimation.hpp"

namespace co2occ {

struct SimpleHmm {
    std::vector<double> mean;
    std::vector<double> sd;
    Matrix trans;
    std::vector<double> init;

    std::size_t num_states() const { return mean.size(); }
    /// Throws ValidationError on inconsistent sizes or invalid probabilities.
    void validate() const;
};

struct SimpleHmmFit {
    SimpleHmm model;
    int iterations = 0;
    std::vector<double> loglik_trace;
    bool converged = false;
    DecodedPath path;
};

/// T x N log densities of y_1..y_T (y_0 is skipped so the table lines up with
/// the switching AR model's transitions).
Matrix simple_emission_table(const SimpleHmm& model, const ObservationSeries& series);

/// EM-Viterbi fit. Means start at equally spaced quantiles of y_1..y_T; the
/// fitted states are sorted by ascending mean so index == occupancy level.
SimpleHmmFit fit_simple_hmm(const ObservationSeries& series, std::size_t n_states,
                            const FitOptions& opts = {}, double self_stay = 0.95);

/// Viterbi path with state index read as occupancy (regime always 0).
DecodedPath decode_simple_hmm(const SimpleHmm& model, const ObservationSeries& series);

double simple_path_loglikelihood(const SimpleHmm& model, const ObservationSeries& series,
                                 const DecodedPath& path);

}  // namespace co2occ
