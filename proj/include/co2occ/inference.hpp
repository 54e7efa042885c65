// Decoding and probability computations for a fixed model.
//
// The first observation y_0 is a conditioning constant; states are decoded for
// the T transitions y_{t-1} -> y_t. Everything runs in the log domain.
#pragma once

#include <span>
#include <vector>

#include "co2occ/core.hpp"

namespace co2occ {

// =============================================================================
// Numerics
// =============================================================================

/// log(sum(exp(v))); -inf for empty input or all -inf.
double log_sum_exp(std::span<const double> v);

double gaussian_logpdf(double x, double mean, double sd);

/// Elementwise log, log(0) = -inf.
Matrix log_matrix(const Matrix& m);
std::vector<double> log_vector(std::span<const double> v);

// =============================================================================
// Generic HMM core over a precomputed emission table (T x N log densities)
// =============================================================================

struct ViterbiResult {
    std::vector<std::size_t> states;
    double log_prob = 0.0;
};

/// Max-product decode. Ties resolve toward the lowest state index.
/// Throws NumericalError when every path has probability zero.
ViterbiResult viterbi_core(const Matrix& log_emission, const Matrix& log_trans,
                           std::span<const double> log_init);

struct ForwardBackwardResult {
    Matrix posterior;             ///< T x N
    Matrix expected_transitions;  ///< N x N, sum over t of P(S_{t-1}=i, S_t=j | Y)
    double log_evidence = 0.0;
};

ForwardBackwardResult forward_backward_core(const Matrix& log_emission, const Matrix& log_trans,
                                            std::span<const double> log_init);

/// log pi(S_1) + sum_t emission + sum_{t>=2} log trans(S_{t-1}, S_t).
double path_loglik_core(const Matrix& log_emission, const Matrix& log_trans,
                        std::span<const double> log_init, std::span<const std::size_t> states);

// =============================================================================
// Switching AR model
// =============================================================================

/// log N(y_cur; c(i) * y_prev + mu(i), sigma(i)^2)
double emission_logdensity(const SwitchingARModel& model, std::size_t i, double y_prev,
                           double y_cur);

/// T x N table of emission_logdensity for every transition and state.
Matrix emission_table(const SwitchingARModel& model, const ObservationSeries& series);

struct Decoding {
    DecodedPath path;
    double log_prob = 0.0;
};

Decoding viterbi(const SwitchingARModel& model, const ObservationSeries& series);

struct Posteriors {
    PosteriorMatrix posterior;
    Matrix expected_transitions;
    double log_evidence = 0.0;
};

Posteriors forward_backward(const SwitchingARModel& model, const ObservationSeries& series);

/// Complete-data log-likelihood of (path, observations). Throws
/// ValidationError if the path length differs from T.
double path_loglikelihood(const SwitchingARModel& model, const ObservationSeries& series,
                          const DecodedPath& path);

}  // namespace co2occ
